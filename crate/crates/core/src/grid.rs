//! Uniform periodic configuration-space lattice.
//!
//! Each of the `N` particles lives on its own 1D axis of `M` points spanning
//! `[-L/2, L/2)`. Configuration-space arrays are stored row-major with the
//! particle-1 axis slowest.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::LatticeError;

pub const MAX_PARTICLES: usize = 3;
pub const MIN_POINTS: usize = 8;
/// 2^26 complex doubles is 1 GiB; anything larger is not desk scale.
pub const MAX_SITES: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    particles: usize,
    points: usize,
    box_length: f64,
}

pub fn build_grid(particles: usize, points: usize, box_length: f64) -> Result<Grid, LatticeError> {
    Grid::new(particles, points, box_length)
}

impl Grid {
    pub fn new(particles: usize, points: usize, box_length: f64) -> Result<Self, LatticeError> {
        if particles == 0 || particles > MAX_PARTICLES {
            return Err(LatticeError::ParticleCount(particles));
        }
        if points < MIN_POINTS || !points.is_power_of_two() {
            return Err(LatticeError::PointsPerAxis(points));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(LatticeError::BoxLength(box_length));
        }
        let sites = points
            .checked_pow(particles as u32)
            .filter(|&s| s <= MAX_SITES)
            .ok_or(LatticeError::TooLarge(points.saturating_pow(particles as u32)))?;
        debug_assert!(sites > 0);
        Ok(Self {
            particles,
            points,
            box_length,
        })
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Exact because `points` is a power of two.
    pub fn spacing(&self) -> f64 {
        self.box_length / self.points as f64
    }

    /// Number of configuration-space sites, `M^N`.
    pub fn len(&self) -> usize {
        self.points.pow(self.particles as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Configuration-space volume element `dx^N`.
    pub fn volume_element(&self) -> f64 {
        self.spacing().powi(self.particles as i32)
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.spacing()
    }

    pub fn coordinate(&self, index: usize) -> f64 {
        -0.5 * self.box_length + index as f64 * self.spacing()
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coordinate(i)).collect()
    }

    /// Angular wavenumbers in standard FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let m = self.points;
        let dk = 2.0 * PI / self.box_length;
        (0..m)
            .map(|j| {
                let signed = if j < m / 2 { j as f64 } else { j as f64 - m as f64 };
                signed * dk
            })
            .collect()
    }

    /// Distance between consecutive elements along `axis` in a flat array.
    pub fn stride(&self, axis: usize) -> usize {
        debug_assert!(axis < self.particles);
        self.points.pow((self.particles - 1 - axis) as u32)
    }

    /// Per-axis indices of a flat site index (unused trailing slots are zero).
    pub fn unravel(&self, mut flat: usize) -> [usize; MAX_PARTICLES] {
        let mut idx = [0; MAX_PARTICLES];
        for axis in (0..self.particles).rev() {
            idx[axis] = flat % self.points;
            flat /= self.points;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx[..self.particles].iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// Wraps a coordinate into `[-L/2, L/2)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let half = 0.5 * self.box_length;
        let wrapped = (x + half).rem_euclid(self.box_length) - half;
        // rem_euclid can round up to exactly L for tiny negative inputs
        if wrapped >= half {
            wrapped - self.box_length
        } else {
            wrapped
        }
    }

    /// Minimum-image representative of a displacement.
    pub fn min_image(&self, d: f64) -> f64 {
        d - self.box_length * (d / self.box_length).round()
    }

    /// Index of the grid cell `[x_i - dx/2, x_i + dx/2)` containing `x`.
    pub fn cell_index(&self, x: f64) -> usize {
        let s = (self.wrap(x) + 0.5 * self.box_length) / self.spacing();
        (s.round() as usize) % self.points
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self == other
    }
}
