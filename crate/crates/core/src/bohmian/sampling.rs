//! Quantum-equilibrium sampling of configurations from `|Ψ|²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BohmianConfiguration, BohmianError};
use crate::error::LatticeError;
use crate::grid::{Grid, MAX_PARTICLES};
use crate::wavefunction::WaveFunction;

/// Draws configurations by sequential conditional inverse-CDF: `q_1` from its
/// marginal, then `q_2` given the cell of `q_1`, and so on, with a uniform
/// jitter inside each selected cell.
#[derive(Debug, Clone)]
pub struct EquilibriumSampler {
    grid: Grid,
    time: f64,
    /// `levels[k]` holds, for every prefix `(i_1..i_k)`, the running sum over
    /// `i_{k+1}` of the weight marginalized over the remaining axes.
    levels: Vec<Vec<f64>>,
}

impl EquilibriumSampler {
    pub fn new(psi: &WaveFunction) -> Result<Self, LatticeError> {
        let grid = *psi.grid();
        let m = grid.points();
        let n = grid.particles();
        let full: Vec<f64> = psi.amplitudes().iter().map(|c| c.norm_sqr()).collect();
        if !(full.iter().sum::<f64>() > 0.0) {
            return Err(LatticeError::ZeroNorm);
        }
        // marginals[k] has m^(k+1) entries
        let mut marginals = vec![full];
        for _ in 1..n {
            let finer = marginals.last().unwrap();
            let coarser: Vec<f64> = finer.chunks(m).map(|c| c.iter().sum()).collect();
            marginals.push(coarser);
        }
        marginals.reverse();
        let levels = marginals
            .into_iter()
            .map(|mut w| {
                for row in w.chunks_mut(m) {
                    let mut acc = 0.0;
                    for v in row.iter_mut() {
                        acc += *v;
                        *v = acc;
                    }
                }
                w
            })
            .collect();
        Ok(Self {
            grid,
            time: psi.time(),
            levels,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BohmianConfiguration {
        let m = self.grid.points();
        let dx = self.grid.spacing();
        let mut idx = [0usize; MAX_PARTICLES];
        let mut prefix = 0usize;
        for (axis, level) in self.levels.iter().enumerate() {
            let row = &level[prefix * m..(prefix + 1) * m];
            let target = rng.random::<f64>() * row[m - 1];
            let cell = row.partition_point(|&c| c <= target).min(m - 1);
            idx[axis] = cell;
            prefix = prefix * m + cell;
        }
        let positions = idx[..self.grid.particles()]
            .iter()
            .map(|&i| {
                let jitter = rng.random::<f64>() - 0.5;
                self.grid.wrap(self.grid.coordinate(i) + jitter * dx)
            })
            .collect();
        BohmianConfiguration {
            positions,
            time: self.time,
        }
    }
}

/// One configuration drawn from `|Ψ|²` with a ChaCha8 stream seeded by `rng_seed`.
pub fn sample_quantum_equilibrium(psi: &WaveFunction, rng_seed: u64) -> Result<BohmianConfiguration, BohmianError> {
    let sampler = EquilibriumSampler::new(psi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(sampler.sample(&mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::wavefunction::{gaussian_packet, superpose, Packet};
    use num_complex::Complex64;

    #[test]
    fn delta_like_state_samples_its_cell() {
        let grid = build_grid(2, 16, 16.0).unwrap();
        let target = grid.ravel(&[5, 11]);
        let psi = WaveFunction::from_fn(grid, |_| Complex64::new(0.0, 0.0)).unwrap();
        let mut amps = psi.into_amplitudes();
        amps[target] = Complex64::new(0.0, 3.0);
        let psi = WaveFunction::new(grid, amps, 0.0).unwrap();
        let sampler = EquilibriumSampler::new(&psi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let q = sampler.sample(&mut rng);
            assert_eq!(grid.cell_index(q.positions()[0]), 5);
            assert_eq!(grid.cell_index(q.positions()[1]), 11);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let grid = build_grid(1, 128, 32.0).unwrap();
        let psi = gaussian_packet(&grid, &[Packet::new(1.0, 1.5, 0.0)]).unwrap();
        let a = sample_quantum_equilibrium(&psi, 17).unwrap();
        let b = sample_quantum_equilibrium(&psi, 17).unwrap();
        let c = sample_quantum_equilibrium(&psi, 18).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_state_is_rejected() {
        let grid = build_grid(1, 16, 8.0).unwrap();
        let psi = WaveFunction::zeros(grid);
        assert!(sample_quantum_equilibrium(&psi, 0).is_err());
    }

    #[test]
    fn two_bump_fraction_matches_binomial() {
        let grid = build_grid(1, 256, 32.0).unwrap();
        let left = gaussian_packet(&grid, &[Packet::new(-8.0, 1.0, 0.0)]).unwrap();
        let right = gaussian_packet(&grid, &[Packet::new(8.0, 1.0, 0.0)]).unwrap();
        let psi = superpose(&[
            (Complex64::new(0.7f64.sqrt(), 0.0), left),
            (Complex64::new(0.3f64.sqrt(), 0.0), right),
        ])
        .unwrap();
        let sampler = EquilibriumSampler::new(&psi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000;
        let left_count = (0..n).filter(|_| sampler.sample(&mut rng).positions()[0] < 0.0).count();
        let frac = left_count as f64 / n as f64;
        let sigma = (0.7 * 0.3 / n as f64).sqrt();
        assert!((frac - 0.7).abs() < 3.0 * sigma, "fraction {frac}");
    }
}
