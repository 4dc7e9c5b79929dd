//! FFT machinery for configuration-space arrays.
//!
//! Multi-dimensional transforms are applied one axis at a time. Strided axes
//! are transposed into contiguous lines first, so every 1D transform sees the
//! same memory layout no matter which axis it belongs to; rustfft is
//! deterministic per line, so results are bit-identical for any thread count.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

/// Below this many complex values per transform pass, stay on one thread.
const PARALLEL_THRESHOLD: usize = 1 << 14;

#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid: *grid,
            forward: planner.plan_fft_forward(grid.points()),
            inverse: planner.plan_fft_inverse(grid.points()),
            wavenumbers: grid.wavenumbers(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Unnormalized forward transform over every axis.
    pub fn forward(&self, data: &mut [Complex64]) {
        for axis in 0..self.grid.particles() {
            self.transform_axis(data, axis, &self.forward);
        }
    }

    /// Inverse transform over every axis, including the `1/M^N` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        for axis in 0..self.grid.particles() {
            self.transform_axis(data, axis, &self.inverse);
        }
        let scale = 1.0 / self.grid.len() as f64;
        scale_all(data, scale);
    }

    /// `d/dx` of one periodic line of `M` samples, in place.
    ///
    /// The Nyquist coefficient is dropped: its derivative is not representable
    /// by a real-symmetric spectrum.
    pub fn derivative_line(&self, line: &mut [Complex64]) {
        self.spectral_multiply_line(line, |k| Complex64::new(0.0, k), true);
    }

    /// `d²/dx²` of one periodic line, in place.
    pub fn second_derivative_line(&self, line: &mut [Complex64]) {
        self.spectral_multiply_line(line, |k| Complex64::new(-k * k, 0.0), false);
    }

    fn spectral_multiply_line(&self, line: &mut [Complex64], symbol: impl Fn(f64) -> Complex64, drop_nyquist: bool) {
        let m = self.grid.points();
        debug_assert_eq!(line.len(), m);
        self.forward.process(line);
        let scale = 1.0 / m as f64;
        for (j, (c, &k)) in line.iter_mut().zip(&self.wavenumbers).enumerate() {
            if drop_nyquist && j == m / 2 {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c *= symbol(k) * scale;
            }
        }
        self.inverse.process(line);
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, fft: &Arc<dyn Fft<f64>>) {
        let m = self.grid.points();
        let stride = self.grid.stride(axis);
        if stride == 1 {
            process_lines(data, m, fft);
            return;
        }
        let block = m * stride;
        let mut scratch = vec![Complex64::new(0.0, 0.0); block];
        for chunk in data.chunks_mut(block) {
            // chunk is m rows of `stride` values; lines run down the columns
            transpose(chunk, &mut scratch, m, stride);
            process_lines(&mut scratch, m, fft);
            transpose(&scratch, chunk, stride, m);
        }
    }
}

fn process_lines(data: &mut [Complex64], m: usize, fft: &Arc<dyn Fft<f64>>) {
    if data.len() < PARALLEL_THRESHOLD {
        fft.process(data);
    } else {
        let lines_per_task = (PARALLEL_THRESHOLD / m).max(1);
        data.par_chunks_mut(m * lines_per_task)
            .for_each(|chunk| fft.process(chunk));
    }
}

/// `dst[c * rows + r] = src[r * cols + c]`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    debug_assert_eq!(src.len(), rows * cols);
    if src.len() < PARALLEL_THRESHOLD {
        for (c, out) in dst.chunks_mut(rows).enumerate() {
            for (r, v) in out.iter_mut().enumerate() {
                *v = src[r * cols + c];
            }
        }
    } else {
        dst.par_chunks_mut(rows).enumerate().for_each(|(c, out)| {
            for (r, v) in out.iter_mut().enumerate() {
                *v = src[r * cols + c];
            }
        });
    }
}

pub(crate) fn scale_all(data: &mut [Complex64], scale: f64) {
    if data.len() < PARALLEL_THRESHOLD {
        data.iter_mut().for_each(|c| *c *= scale);
    } else {
        data.par_iter_mut().for_each(|c| *c *= scale);
    }
}

/// Multiplies `data` elementwise by `factors`.
pub(crate) fn multiply_all(data: &mut [Complex64], factors: &[Complex64]) {
    debug_assert_eq!(data.len(), factors.len());
    if data.len() < PARALLEL_THRESHOLD {
        data.iter_mut().zip(factors).for_each(|(c, f)| *c *= f);
    } else {
        data.par_iter_mut().zip(factors.par_iter()).for_each(|(c, f)| *c *= f);
    }
}

/// Builds `∏_p axis_factor[i_p]` over the configuration grid.
pub(crate) fn separable_product<T>(grid: &Grid, axis_factor: &[T]) -> Vec<T>
where
    T: Copy + std::ops::Mul<Output = T> + Send + Sync,
{
    let m = grid.points();
    let mut out: Vec<T> = axis_factor.to_vec();
    for _ in 1..grid.particles() {
        let prev = out;
        out = Vec::with_capacity(prev.len() * m);
        for &a in &prev {
            out.extend(axis_factor.iter().map(|&b| a * b));
        }
    }
    out
}

/// Builds `Σ_p axis_term[i_p]` over the configuration grid.
pub(crate) fn separable_sum(grid: &Grid, axis_term: &[f64]) -> Vec<f64> {
    let m = grid.points();
    let mut out: Vec<f64> = axis_term.to_vec();
    for _ in 1..grid.particles() {
        let prev = out;
        out = Vec::with_capacity(prev.len() * m);
        for &a in &prev {
            out.extend(axis_term.iter().map(|&b| a + b));
        }
    }
    out
}
