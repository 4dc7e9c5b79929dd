//! Localization operator, modified split-step propagation and rate estimates.

mod localization;
mod propagator;
mod quantum_potential;
pub mod rates;
mod realization;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bohmian::BohmianError;
use crate::error::LatticeError;

pub use localization::{localization_potential, LocalizationPotential};
pub use propagator::{modified_step, Propagator, STEP_ERROR_LIMIT, STEP_WARN_LIMIT};
pub use quantum_potential::quantum_potential;
pub use realization::{run_realization, run_realization_from, run_realization_with, RunOptions, RunRecord, RunSample};

#[derive(Debug, Error)]
pub enum CollapseError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Bohmian(#[from] BohmianError),
    #[error(transparent)]
    Scenario(#[from] crate::config::ConfigError),
    #[error("invalid collapse parameters: {0}")]
    Params(String),
    #[error("potential has {got} samples but the grid has {expected} sites")]
    PotentialLength { expected: usize, got: usize },
    #[error("time step must be positive and finite, got {0}")]
    TimeStep(f64),
    #[error("gamma_L * max(Lambda) * dt = {0} exceeds the hard limit")]
    StepTooLarge(f64),
    #[error("non-finite amplitudes after the step ending at t = {0}")]
    NonFinite(f64),
}

/// Strength and range of the localization term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseParams {
    #[serde(rename = "gamma_L")]
    pub gamma_l: f64,
    #[serde(rename = "a_L")]
    pub a_l: f64,
    #[serde(default)]
    pub renormalize_each_step: bool,
}

impl CollapseParams {
    pub fn new(gamma_l: f64, a_l: f64, renormalize_each_step: bool) -> Self {
        Self {
            gamma_l,
            a_l,
            renormalize_each_step,
        }
    }

    pub fn validate(&self) -> Result<(), CollapseError> {
        if !(self.gamma_l.is_finite() && self.gamma_l >= 0.0) {
            return Err(CollapseError::Params(format!(
                "gamma_L must be finite and non-negative, got {}",
                self.gamma_l
            )));
        }
        if !(self.a_l.is_finite() && self.a_l > 0.0) {
            return Err(CollapseError::Params(format!(
                "a_L must be finite and positive, got {}",
                self.a_l
            )));
        }
        Ok(())
    }
}
