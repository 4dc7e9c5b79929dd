//! Guidance velocity `v_n = Im(∂_n Ψ / Ψ)` from the spectral gradient.

use std::cell::RefCell;
use std::collections::HashMap;

use num_complex::Complex64;

use crate::grid::{Grid, MAX_PARTICLES};
use crate::spectral::Spectral;
use crate::wavefunction::WaveFunction;

/// Relative density below which a site counts as a node.
pub const NODE_THRESHOLD: f64 = 1e-12;

/// Anything that can report the guidance velocity at a configuration point.
pub trait VelocitySource {
    fn grid(&self) -> &Grid;

    /// Velocity at a site of the configuration grid, per axis.
    fn site_velocity(&self, flat: usize, axis: usize) -> f64;

    /// Multilinear interpolation of the site velocities at `point`.
    fn velocity_at(&self, point: &[f64], out: &mut [f64]) {
        let grid = *self.grid();
        let n = grid.particles();
        let m = grid.points();
        let dx = grid.spacing();
        let half = 0.5 * grid.box_length();
        let mut lo = [0usize; MAX_PARTICLES];
        let mut frac = [0.0f64; MAX_PARTICLES];
        for axis in 0..n {
            let s = (grid.wrap(point[axis]) + half) / dx;
            let base = s.floor();
            lo[axis] = (base as usize) % m;
            frac[axis] = s - base;
        }
        out[..n].iter_mut().for_each(|v| *v = 0.0);
        let mut idx = [0usize; MAX_PARTICLES];
        for corner in 0..(1usize << n) {
            let mut weight = 1.0;
            for axis in 0..n {
                if corner >> axis & 1 == 1 {
                    idx[axis] = (lo[axis] + 1) % m;
                    weight *= frac[axis];
                } else {
                    idx[axis] = lo[axis];
                    weight *= 1.0 - frac[axis];
                }
            }
            if weight == 0.0 {
                continue;
            }
            let flat = grid.ravel(&idx);
            for (axis, v) in out[..n].iter_mut().enumerate() {
                *v += weight * self.site_velocity(flat, axis);
            }
        }
    }
}

/// Velocity on every configuration site, one array per particle axis.
#[derive(Debug, Clone)]
pub struct VelocityField {
    grid: Grid,
    components: Vec<Vec<f64>>,
}

impl VelocityField {
    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Largest speed on any axis.
    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flatten()
            .fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }
}

impl VelocitySource for VelocityField {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn site_velocity(&self, flat: usize, axis: usize) -> f64 {
        self.components[axis][flat]
    }
}

pub fn velocity_field(psi: &WaveFunction) -> VelocityField {
    velocity_field_with(psi, &Spectral::new(psi.grid()))
}

pub(crate) fn velocity_field_with(psi: &WaveFunction, spectral: &Spectral) -> VelocityField {
    let grid = *psi.grid();
    let m = grid.points();
    let amps = psi.amplitudes();
    let floor = NODE_THRESHOLD * psi.max_density();
    let kmax = grid.nyquist();
    let mut components = Vec::with_capacity(grid.particles());
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    for axis in 0..grid.particles() {
        let stride = grid.stride(axis);
        let mut out = vec![0.0; grid.len()];
        for start in line_starts(&grid, axis) {
            gather(amps, start, stride, &mut line);
            spectral.derivative_line(&mut line);
            for (j, d) in line.iter().enumerate() {
                let flat = start + j * stride;
                out[flat] = guidance(amps[flat], *d, floor, kmax);
            }
        }
        components.push(out);
    }
    VelocityField { grid, components }
}

/// Evaluates site velocities on demand, transforming only the lines that
/// interpolation actually touches. Values are bit-identical to
/// [`velocity_field`].
pub struct VelocityProbe<'a> {
    psi: &'a WaveFunction,
    spectral: &'a Spectral,
    floor: f64,
    kmax: f64,
    /// (axis, first flat index of the line) -> derivative along that line
    lines: RefCell<HashMap<(usize, usize), Vec<Complex64>>>,
}

impl<'a> VelocityProbe<'a> {
    pub fn new(psi: &'a WaveFunction, spectral: &'a Spectral) -> Self {
        debug_assert!(psi.grid().same_shape(spectral.grid()));
        Self {
            psi,
            spectral,
            floor: NODE_THRESHOLD * psi.max_density(),
            kmax: psi.grid().nyquist(),
            lines: RefCell::new(HashMap::new()),
        }
    }

    pub fn cached_lines(&self) -> usize {
        self.lines.borrow().len()
    }
}

impl VelocitySource for VelocityProbe<'_> {
    fn grid(&self) -> &Grid {
        self.psi.grid()
    }

    fn site_velocity(&self, flat: usize, axis: usize) -> f64 {
        let grid = self.psi.grid();
        let m = grid.points();
        let stride = grid.stride(axis);
        let pos = (flat / stride) % m;
        let start = flat - pos * stride;
        let mut lines = self.lines.borrow_mut();
        let line = lines.entry((axis, start)).or_insert_with(|| {
            let mut line = vec![Complex64::new(0.0, 0.0); m];
            gather(self.psi.amplitudes(), start, stride, &mut line);
            self.spectral.derivative_line(&mut line);
            line
        });
        guidance(self.psi.amplitudes()[flat], line[pos], self.floor, self.kmax)
    }
}

fn guidance(psi: Complex64, dpsi: Complex64, floor: f64, kmax: f64) -> f64 {
    let v = (dpsi / psi).im;
    if !v.is_finite() {
        0.0
    } else if psi.norm_sqr() < floor {
        v.clamp(-kmax, kmax)
    } else {
        v
    }
}

fn gather(amps: &[Complex64], start: usize, stride: usize, line: &mut [Complex64]) {
    for (j, c) in line.iter_mut().enumerate() {
        *c = amps[start + j * stride];
    }
}

/// First flat index of every line running along `axis`.
fn line_starts(grid: &Grid, axis: usize) -> impl Iterator<Item = usize> {
    let stride = grid.stride(axis);
    let block = stride * grid.points();
    let len = grid.len();
    (0..len).step_by(block).flat_map(move |b| b..b + stride)
}
