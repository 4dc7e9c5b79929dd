//! Gaussian-smoothed density of the Bohmian positions along one axis.

use serde::Serialize;

use super::{BohmianConfiguration, BohmianError};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothedDensity {
    samples: Vec<f64>,
    averaging_length: f64,
    grid: Grid,
}

impl SmoothedDensity {
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn averaging_length(&self) -> f64 {
        self.averaging_length
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(0.0, f64::max)
    }

    /// Evaluates the sum of Gaussians at an arbitrary point.
    pub fn evaluate(grid: &Grid, positions: &[f64], a_l: f64, r: f64) -> f64 {
        positions
            .iter()
            .map(|&q| {
                let d = grid.min_image(r - q) / a_l;
                (-d * d).exp()
            })
            .sum()
    }
}

/// `Σ_n exp(-(r - q_n)² / a_L²)` at every axis point, with minimum-image distance.
pub fn smoothed_density(q: &BohmianConfiguration, grid: &Grid, a_l: f64) -> Result<SmoothedDensity, BohmianError> {
    if !(a_l.is_finite() && a_l > 0.0) {
        return Err(BohmianError::AveragingLength(a_l));
    }
    if q.particles() != grid.particles() {
        return Err(BohmianError::Arity {
            expected: grid.particles(),
            got: q.particles(),
        });
    }
    let samples = grid
        .coordinates()
        .into_iter()
        .map(|r| SmoothedDensity::evaluate(grid, q.positions(), a_l, r))
        .collect();
    Ok(SmoothedDensity {
        samples,
        averaging_length: a_l,
        grid: *grid,
    })
}
