//! Distance between an ensemble of positions and the `|Ψ|²` marginals.

use super::EnsembleError;
use crate::wavefunction::WaveFunction;

pub const MIN_REALIZATIONS: usize = 100;

/// Largest per-axis L1 distance between the cell histogram of `positions`
/// (one configuration per entry) and the marginal of `|Ψ|²`; in `[0, 2]`.
pub fn equivariance_distance(positions: &[Vec<f64>], psi: &WaveFunction) -> Result<f64, EnsembleError> {
    if positions.len() < MIN_REALIZATIONS {
        return Err(EnsembleError::TooFewRealizations(positions.len()));
    }
    let grid = psi.grid();
    let m = grid.points();
    let weight = 1.0 / positions.len() as f64;
    let mut worst: f64 = 0.0;
    for axis in 0..grid.particles() {
        let marginal = psi.axis_marginal(axis)?;
        let mut hist = vec![0.0; m];
        for q in positions {
            hist[grid.cell_index(q[axis])] += weight;
        }
        let l1: f64 = hist.iter().zip(&marginal).map(|(h, p)| (h - p).abs()).sum();
        worst = worst.max(l1);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohmian::EquilibriumSampler;
    use crate::grid::build_grid;
    use crate::wavefunction::{gaussian_packet, Packet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn resampled_positions_are_close() {
        // sampling noise alone gives E[L1] ≈ 0.0179·sqrt(σ/dx) at 10⁴ draws,
        // about 0.036 for σ = 4 dx
        let grid = build_grid(1, 256, 32.0).unwrap();
        let psi = gaussian_packet(&grid, &[Packet::new(0.0, 0.5, 0.0)]).unwrap();
        let sampler = EquilibriumSampler::new(&psi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let qs: Vec<Vec<f64>> = (0..10_000)
            .map(|_| sampler.sample(&mut rng).positions().to_vec())
            .collect();
        let d = equivariance_distance(&qs, &psi).unwrap();
        assert!(d < 0.05, "{d}");
    }

    #[test]
    fn disjoint_support_is_near_two() {
        let grid = build_grid(1, 256, 32.0).unwrap();
        let psi = gaussian_packet(&grid, &[Packet::new(-5.0, 1.0, 0.0)]).unwrap();
        let qs = vec![vec![10.0]; 200];
        let d = equivariance_distance(&qs, &psi).unwrap();
        assert!((d - 2.0).abs() < 1e-9, "{d}");
    }

    #[test]
    fn matching_histogram_is_zero() {
        // uniform state, one position per cell
        let grid = build_grid(1, 128, 16.0).unwrap();
        let psi = WaveFunction::from_fn(grid, |_| num_complex::Complex64::new(1.0, 0.0)).unwrap();
        let qs: Vec<Vec<f64>> = grid.coordinates().into_iter().map(|x| vec![x]).collect();
        assert!(equivariance_distance(&qs, &psi).unwrap() < 1e-12);
    }

    #[test]
    fn needs_enough_realizations() {
        let grid = build_grid(1, 16, 8.0).unwrap();
        let psi = WaveFunction::from_fn(grid, |_| num_complex::Complex64::new(1.0, 0.0)).unwrap();
        assert!(equivariance_distance(&vec![vec![0.0]; 99], &psi).is_err());
    }
}
