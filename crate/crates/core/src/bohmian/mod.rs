//! de Broglie-Bohm positions guided by the wave function.

mod sampling;
mod smoothed;
mod trajectory;
mod velocity;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::LatticeError;
use crate::grid::Grid;

pub use sampling::{sample_quantum_equilibrium, EquilibriumSampler};
pub use smoothed::{smoothed_density, SmoothedDensity};
pub use trajectory::{advance_positions, advance_with, interpolate_velocity};
pub(crate) use velocity::velocity_field_with;
pub use velocity::{velocity_field, VelocityField, VelocityProbe, VelocitySource, NODE_THRESHOLD};

#[derive(Debug, Error)]
pub enum BohmianError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("averaging length a_L must be positive and finite, got {0}")]
    AveragingLength(f64),
    #[error("configuration has {got} positions but the grid has {expected} particles")]
    Arity { expected: usize, got: usize },
    #[error("end state time {end} differs from start time {start} + dt {dt}")]
    TimeMismatch { start: f64, end: f64, dt: f64 },
}

/// Positions `q_1..q_N` of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BohmianConfiguration {
    positions: Vec<f64>,
    time: f64,
}

impl BohmianConfiguration {
    /// Positions are wrapped into the periodic box.
    pub fn new(grid: &Grid, positions: Vec<f64>, time: f64) -> Result<Self, BohmianError> {
        if positions.len() != grid.particles() {
            return Err(BohmianError::Arity {
                expected: grid.particles(),
                got: positions.len(),
            });
        }
        let positions = positions.into_iter().map(|x| grid.wrap(x)).collect();
        Ok(Self { positions, time })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn particles(&self) -> usize {
        self.positions.len()
    }
}
