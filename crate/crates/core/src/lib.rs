//! Lattice simulation of Schrödinger evolution with a Bohmian localization
//! term, plus ensemble tools for collapse statistics.

// `!(x > 0.0)` style guards reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bohmian;
pub mod collapse;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod output;
pub mod rate_table;
pub mod snapshot;
pub mod spectral;
pub mod validation;
pub mod wavefunction;

pub use error::{LatticeError, SnapshotError};
pub use grid::{build_grid, Grid};
pub use wavefunction::WaveFunction;
