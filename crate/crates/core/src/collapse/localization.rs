//! Position-diagonal localization operator `Λ(r_1..r_N) = Σ_p N_B(r_p)`.

use crate::bohmian::SmoothedDensity;
use crate::error::LatticeError;
use crate::grid::Grid;
use crate::spectral::separable_sum;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationPotential {
    grid: Grid,
    values: Vec<f64>,
    max: f64,
}

impl LocalizationPotential {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn max(&self) -> f64 {
        self.max
    }
}

pub fn localization_potential(nb: &SmoothedDensity, grid: &Grid) -> Result<LocalizationPotential, LatticeError> {
    if nb.samples().len() != grid.points() || nb.grid().points() != grid.points() {
        return Err(LatticeError::GridMismatch);
    }
    if nb.grid().box_length() != grid.box_length() {
        return Err(LatticeError::GridMismatch);
    }
    let values = separable_sum(grid, nb.samples());
    Ok(LocalizationPotential {
        grid: *grid,
        values,
        max: grid.particles() as f64 * nb.max(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohmian::{smoothed_density, BohmianConfiguration};
    use crate::grid::build_grid;

    #[test]
    fn single_particle_is_the_density() {
        let grid = build_grid(1, 32, 16.0).unwrap();
        let q = BohmianConfiguration::new(&grid, vec![1.0], 0.0).unwrap();
        let nb = smoothed_density(&q, &grid, 1.5).unwrap();
        let lam = localization_potential(&nb, &grid).unwrap();
        assert_eq!(lam.values(), nb.samples());
    }

    #[test]
    fn clustered_pair_gives_n_squared() {
        let grid = build_grid(2, 64, 32.0).unwrap();
        let q = BohmianConfiguration::new(&grid, vec![0.0, 0.05], 0.0).unwrap();
        let nb = smoothed_density(&q, &grid, 3.0).unwrap();
        let lam = localization_potential(&nb, &grid).unwrap();
        let at_cluster = lam.values()[grid.ravel(&[32, 32])];
        assert!((at_cluster - 4.0).abs() < 1e-3, "{at_cluster}");
    }

    #[test]
    fn saturated_density_is_constant() {
        let grid = build_grid(3, 8, 4.0).unwrap();
        let q = BohmianConfiguration::new(&grid, vec![-1.0, 0.0, 1.0], 0.0).unwrap();
        let nb = smoothed_density(&q, &grid, 1e5).unwrap();
        let lam = localization_potential(&nb, &grid).unwrap();
        assert!(lam.values().iter().all(|&v| (v - 9.0).abs() < 1e-6));
    }

    #[test]
    fn rejects_other_grid() {
        let grid = build_grid(1, 32, 16.0).unwrap();
        let other = build_grid(1, 64, 16.0).unwrap();
        let q = BohmianConfiguration::new(&grid, vec![0.0], 0.0).unwrap();
        let nb = smoothed_density(&q, &grid, 1.0).unwrap();
        assert!(localization_potential(&nb, &other).is_err());
    }
}
