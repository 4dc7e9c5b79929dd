//! Configuration-space wave functions and their observables.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::LatticeError;
use crate::grid::{Grid, MAX_PARTICLES};
use crate::spectral::{multiply_all, separable_product, Spectral};

/// Relative tolerance for the exchange-symmetry invariant.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Complex amplitudes `Φ(r_1, …, r_N)` sampled on a [`Grid`].
///
/// Amplitudes are normalized so that `Σ |Φ|² dx^N` is the squared norm.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    amplitudes: Vec<Complex64>,
    time: f64,
    symmetrized: bool,
}

impl WaveFunction {
    pub fn new(grid: Grid, amplitudes: Vec<Complex64>, time: f64) -> Result<Self, LatticeError> {
        if amplitudes.len() != grid.len() {
            return Err(LatticeError::Length {
                expected: grid.len(),
                got: amplitudes.len(),
            });
        }
        if let Some(i) = amplitudes.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(LatticeError::NonFinite(i));
        }
        Ok(Self {
            grid,
            amplitudes,
            time,
            symmetrized: false,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            amplitudes: vec![Complex64::new(0.0, 0.0); grid.len()],
            time: 0.0,
            symmetrized: false,
        }
    }

    /// Builds a state from a closure evaluated at every configuration point.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Complex64) -> Result<Self, LatticeError> {
        let coords = grid.coordinates();
        let n = grid.particles();
        let mut point = [0.0; MAX_PARTICLES];
        let amplitudes = (0..grid.len())
            .map(|flat| {
                let idx = grid.unravel(flat);
                for p in 0..n {
                    point[p] = coords[idx[p]];
                }
                f(&point[..n])
            })
            .collect();
        Self::new(grid, amplitudes, 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn is_symmetrized(&self) -> bool {
        self.symmetrized
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub(crate) fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    pub fn norm_squared(&self) -> f64 {
        norm_squared(self)
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Copy rescaled to unit norm.
    pub fn normalized(&self) -> Result<Self, LatticeError> {
        let n2 = self.norm_squared();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(LatticeError::ZeroNorm);
        }
        let mut out = self.clone();
        crate::spectral::scale_all(&mut out.amplitudes, 1.0 / n2.sqrt());
        Ok(out)
    }

    /// Largest `|Φ|²` over the grid.
    pub fn max_density(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max)
    }

    /// Largest pointwise `|a - b|` between two states on the same grid.
    pub fn max_deviation(&self, other: &Self) -> Result<f64, LatticeError> {
        if self.grid != other.grid {
            return Err(LatticeError::GridMismatch);
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Marginal probability of each cell along `axis`, normalized to sum 1.
    pub fn axis_marginal(&self, axis: usize) -> Result<Vec<f64>, LatticeError> {
        let m = self.grid.points();
        let mut out = vec![0.0; m];
        let mut total = 0.0;
        for (flat, c) in self.amplitudes.iter().enumerate() {
            let w = c.norm_sqr();
            out[self.grid.unravel(flat)[axis]] += w;
            total += w;
        }
        if !(total > 0.0) {
            return Err(LatticeError::ZeroNorm);
        }
        out.iter_mut().for_each(|v| *v /= total);
        Ok(out)
    }

    /// Maximum relative deviation from invariance under axis transpositions.
    pub fn exchange_asymmetry(&self) -> f64 {
        let scale = self.max_density().sqrt();
        if scale == 0.0 {
            return 0.0;
        }
        let n = self.grid.particles();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in a + 1..n {
                for flat in 0..self.grid.len() {
                    let mut idx = self.grid.unravel(flat);
                    idx.swap(a, b);
                    let other = self.grid.ravel(&idx);
                    worst = worst.max((self.amplitudes[flat] - self.amplitudes[other]).norm());
                }
            }
        }
        worst / scale
    }
}

/// One particle's Gaussian factor `exp(-(x-c)²/(4σ²) + i k x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Packet {
    pub center: f64,
    pub width: f64,
    #[serde(default)]
    pub momentum: f64,
}

impl Packet {
    pub fn new(center: f64, width: f64, momentum: f64) -> Self {
        Self {
            center,
            width,
            momentum,
        }
    }

    fn check(&self, grid: &Grid) -> Result<(), LatticeError> {
        let min = 4.0 * grid.spacing();
        if !(self.width >= min) {
            return Err(LatticeError::UnderResolved { width: self.width, min });
        }
        if self.center.abs() + 4.0 * self.width > 0.5 * grid.box_length() {
            return Err(LatticeError::NearBoundary {
                center: self.center,
                width: self.width,
            });
        }
        Ok(())
    }
}

/// Normalized product of single-particle Gaussian packets.
pub fn gaussian_packet(grid: &Grid, packets: &[Packet]) -> Result<WaveFunction, LatticeError> {
    if packets.len() != grid.particles() {
        return Err(LatticeError::Arity {
            expected: grid.particles(),
            got: packets.len(),
        });
    }
    for p in packets {
        p.check(grid)?;
    }
    let coords = grid.coordinates();
    let axis_factors: Vec<Vec<Complex64>> = packets
        .iter()
        .map(|p| {
            coords
                .iter()
                .map(|&x| {
                    let d = x - p.center;
                    Complex64::from_polar((-d * d / (4.0 * p.width * p.width)).exp(), p.momentum * x)
                })
                .collect()
        })
        .collect();
    let m = grid.points();
    let amplitudes = (0..grid.len())
        .map(|flat| {
            let idx = grid.unravel(flat);
            axis_factors
                .iter()
                .enumerate()
                .fold(Complex64::new(1.0, 0.0), |acc, (p, f)| acc * f[idx[p] % m])
        })
        .collect();
    WaveFunction::new(*grid, amplitudes, 0.0)?.normalized()
}

/// `Σ c_i ψ_i`, renormalized to unit norm.
pub fn superpose(components: &[(Complex64, WaveFunction)]) -> Result<WaveFunction, LatticeError> {
    let (_, first) = components.first().ok_or(LatticeError::EmptySuperposition)?;
    let grid = *first.grid();
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (coef, psi) in components {
        if psi.grid() != &grid {
            return Err(LatticeError::GridMismatch);
        }
        for (a, b) in acc.iter_mut().zip(psi.amplitudes()) {
            *a += coef * b;
        }
    }
    WaveFunction::new(grid, acc, first.time())?.normalized()
}

/// Projects onto the exchange-symmetric subspace and renormalizes.
pub fn symmetrize(psi: &WaveFunction) -> Result<WaveFunction, LatticeError> {
    let grid = *psi.grid();
    let n = grid.particles();
    let perms = permutations(n);
    let src = psi.amplitudes();
    let amplitudes: Vec<Complex64> = (0..grid.len())
        .map(|flat| {
            let idx = grid.unravel(flat);
            let mut sum = Complex64::new(0.0, 0.0);
            for perm in &perms {
                let mut permuted = [0; MAX_PARTICLES];
                for (slot, &from) in perm.iter().enumerate() {
                    permuted[slot] = idx[from];
                }
                sum += src[grid.ravel(&permuted)];
            }
            sum / perms.len() as f64
        })
        .collect();
    let mut out = WaveFunction::new(grid, amplitudes, psi.time())?.normalized()?;
    out.symmetrized = true;
    Ok(out)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..n {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// `Σ |Φ|² dx^N`.
pub fn norm_squared(psi: &WaveFunction) -> f64 {
    psi.amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>() * psi.grid.volume_element()
}

/// Samples of a real, non-negative function of one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub samples: Vec<f64>,
    pub spacing: f64,
}

impl DensityField {
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.spacing
    }
}

/// Local number density `D_Φ(r)`: the sum of the single-particle marginals
/// divided by `⟨Φ|Φ⟩`, so it integrates to `N`.
pub fn particle_density(psi: &WaveFunction) -> Result<DensityField, LatticeError> {
    let grid = psi.grid();
    let n2 = norm_squared(psi);
    if !(n2 > 0.0) {
        return Err(LatticeError::ZeroNorm);
    }
    let m = grid.points();
    let mut samples = vec![0.0; m];
    for (flat, c) in psi.amplitudes.iter().enumerate() {
        let w = c.norm_sqr();
        let idx = grid.unravel(flat);
        for &i in &idx[..grid.particles()] {
            samples[i] += w;
        }
    }
    // Σ over the other N-1 axes carries dx^(N-1); divide by the norm
    let scale = grid.spacing().powi(grid.particles() as i32 - 1) / n2;
    samples.iter_mut().for_each(|s| *s *= scale);
    Ok(DensityField {
        samples,
        spacing: grid.spacing(),
    })
}

/// Half-open coordinate interval `[lo, hi)`, written `[lo, hi]` in files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<(f64, f64)> for Interval {
    fn from((lo, hi): (f64, f64)) -> Self {
        Self { lo, hi }
    }
}

impl From<Interval> for (f64, f64) {
    fn from(iv: Interval) -> Self {
        (iv.lo, iv.hi)
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }
}

/// Box-shaped region of configuration space, one interval per particle axis.
/// Grid sites are counted when their coordinates fall inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Region {
    axes: Vec<Interval>,
}

impl Region {
    pub fn new(axes: Vec<Interval>) -> Self {
        Self { axes }
    }

    pub fn whole(grid: &Grid) -> Self {
        let half = 0.5 * grid.box_length();
        Self {
            axes: vec![Interval::new(-half, half); grid.particles()],
        }
    }

    pub fn axes(&self) -> &[Interval] {
        &self.axes
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.axes.iter().zip(point).all(|(iv, &x)| iv.contains(x))
    }

    pub fn disjoint_from(&self, other: &Region) -> bool {
        self.axes.iter().zip(&other.axes).any(|(a, b)| !a.overlaps(b))
    }

    /// Checks the arity against `grid` and that every axis covers a grid point.
    pub fn validate(&self, grid: &Grid) -> Result<(), LatticeError> {
        self.axis_masks(grid).map(|_| ())
    }

    fn axis_masks(&self, grid: &Grid) -> Result<Vec<Vec<bool>>, LatticeError> {
        if self.axes.len() != grid.particles() {
            return Err(LatticeError::Arity {
                expected: grid.particles(),
                got: self.axes.len(),
            });
        }
        let coords = grid.coordinates();
        let masks: Vec<Vec<bool>> = self
            .axes
            .iter()
            .map(|iv| coords.iter().map(|&x| iv.contains(x)).collect())
            .collect();
        if masks.iter().any(|m| !m.iter().any(|&b| b)) {
            return Err(LatticeError::EmptyRegion);
        }
        Ok(masks)
    }
}

/// Fraction of `⟨Φ|Φ⟩` carried by grid sites inside `region`.
pub fn branch_weight(psi: &WaveFunction, region: &Region) -> Result<f64, LatticeError> {
    let grid = psi.grid();
    let masks = region.axis_masks(grid)?;
    let mut inside = 0.0;
    let mut total = 0.0;
    for (flat, c) in psi.amplitudes.iter().enumerate() {
        let w = c.norm_sqr();
        total += w;
        let idx = grid.unravel(flat);
        if masks.iter().enumerate().all(|(p, m)| m[idx[p]]) {
            inside += w;
        }
    }
    if !(total > 0.0) {
        return Err(LatticeError::ZeroNorm);
    }
    Ok(inside / total)
}

/// Spectral factors `exp(-i (Σ_n k_n²/2) τ)` for a kinetic sub-step of length `τ`.
pub fn kinetic_factors(grid: &Grid, tau: f64) -> Vec<Complex64> {
    let axis: Vec<Complex64> = grid
        .wavenumbers()
        .iter()
        .map(|&k| Complex64::from_polar(1.0, -0.5 * k * k * tau))
        .collect();
    separable_product(grid, &axis)
}

pub(crate) fn apply_kinetic(spectral: &Spectral, factors: &[Complex64], psi: &mut WaveFunction) {
    spectral.forward(&mut psi.amplitudes);
    multiply_all(&mut psi.amplitudes, factors);
    spectral.inverse(&mut psi.amplitudes);
}

/// Free evolution for half of a step `dt`: the spectral multiplier
/// `exp(-i (Σ_n k_n²/2) dt/2)`. Time advances by `dt/2`.
pub fn kinetic_half_step(psi: &WaveFunction, dt: f64) -> WaveFunction {
    let mut out = psi.clone();
    if dt != 0.0 {
        let spectral = Spectral::new(psi.grid());
        let factors = kinetic_factors(psi.grid(), 0.5 * dt);
        apply_kinetic(&spectral, &factors, &mut out);
    }
    out.time = psi.time + 0.5 * dt;
    out
}
