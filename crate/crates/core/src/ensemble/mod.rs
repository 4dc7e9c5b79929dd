//! Ensembles of realizations and their statistics.

mod equivariance;
mod fit;
pub mod library;
mod runner;
mod seeds;

use thiserror::Error;

use crate::bohmian::BohmianError;
use crate::collapse::CollapseError;
use crate::config::ConfigError;
use crate::error::LatticeError;

pub use equivariance::{equivariance_distance, MIN_REALIZATIONS};
pub use fit::{fit_collapse_rate, fit_log_ratio, RateFit, FIT_FLOOR, MIN_FIT_POINTS, RATE_CONVENTION};
pub use runner::{
    run_ensemble, run_ensemble_with, sample_positions, BranchOutcome, EnsembleOptions, EnsembleResult, EnsembleSummary,
    EquivariancePoint, RunMetadata, RunOutcome,
};
pub use seeds::{realization_seed, splitmix64};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error(transparent)]
    Collapse(#[from] CollapseError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Bohmian(#[from] BohmianError),
    #[error("fit window holds {0} samples; at least 5 are needed")]
    ShortWindow(usize),
    #[error("{0} realizations is too few; at least 100 are needed")]
    TooFewRealizations(usize),
    #[error("bad branch selection: {0}")]
    Branch(String),
}
