//! Strang split step for `i dΨ/dt = [H + iγ_L Λ]Ψ` coupled to the guidance equation.

use std::sync::atomic::{AtomicBool, Ordering};

use num_complex::Complex64;

use super::{CollapseError, CollapseParams};
use crate::bohmian::{advance_with, smoothed_density, BohmianConfiguration, VelocityProbe};
use crate::grid::Grid;
use crate::spectral::{multiply_all, separable_product, Spectral};
use crate::wavefunction::{apply_kinetic, kinetic_factors, WaveFunction};

/// Above this `γ_L·max(Λ)·dt` a warning is logged once per propagator.
pub const STEP_WARN_LIMIT: f64 = 0.1;
/// Above this the step is refused.
pub const STEP_ERROR_LIMIT: f64 = 1.0;

/// Precomputed factors for repeated steps of one fixed size on one grid.
pub struct Propagator {
    grid: Grid,
    spectral: Spectral,
    params: CollapseParams,
    dt: f64,
    half_kinetic: Vec<Complex64>,
    /// `exp(-i V dt)`, absent for a zero potential
    potential_phase: Option<Vec<Complex64>>,
    flip_gamma: bool,
    warned: AtomicBool,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("grid", &self.grid)
            .field("params", &self.params)
            .field("dt", &self.dt)
            .finish()
    }
}

impl Propagator {
    pub fn new(grid: &Grid, potential: Option<&[f64]>, params: CollapseParams, dt: f64) -> Result<Self, CollapseError> {
        params.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(CollapseError::TimeStep(dt));
        }
        let potential_phase = match potential {
            Some(v) if v.len() != grid.len() => {
                return Err(CollapseError::PotentialLength {
                    expected: grid.len(),
                    got: v.len(),
                })
            }
            Some(v) if v.iter().any(|&x| x != 0.0) => {
                Some(v.iter().map(|&x| Complex64::from_polar(1.0, -x * dt)).collect())
            }
            _ => None,
        };
        Ok(Self {
            grid: *grid,
            spectral: Spectral::new(grid),
            params,
            dt,
            half_kinetic: kinetic_factors(grid, 0.5 * dt),
            potential_phase,
            flip_gamma: false,
            warned: AtomicBool::new(false),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &CollapseParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Reverses the sign of `γ_L`; used to check that the validation suite
    /// notices a broken localization term.
    pub(crate) fn inject_sign_fault(&mut self) {
        self.flip_gamma = true;
    }

    fn gamma(&self) -> f64 {
        if self.flip_gamma {
            -self.params.gamma_l
        } else {
            self.params.gamma_l
        }
    }

    /// Per-axis gains `exp(γ_L N_B(r) dt)` for positions `q`, and `max Λ`.
    fn axis_gain(&self, q: &BohmianConfiguration) -> Result<(Vec<f64>, f64), CollapseError> {
        let nb = smoothed_density(q, &self.grid, self.params.a_l)?;
        let lambda_max = self.grid.particles() as f64 * nb.max();
        let g = self.gamma() * self.dt;
        let gain = nb.samples().iter().map(|&v| (g * v).exp()).collect();
        Ok((gain, lambda_max))
    }

    fn check_stiffness(&self, lambda_max: f64) -> Result<(), CollapseError> {
        let s = self.params.gamma_l * lambda_max * self.dt;
        if s > STEP_ERROR_LIMIT {
            return Err(CollapseError::StepTooLarge(s));
        }
        if s > STEP_WARN_LIMIT && !self.warned.swap(true, Ordering::Relaxed) {
            log::warn!("gamma_L * max(Lambda) * dt = {s:.3} is large; trajectory coupling degrades");
        }
        Ok(())
    }

    /// Multiplies by `exp(γ_L Λ dt)` only: no kinetic or potential part.
    pub fn apply_localization(&self, psi: &mut WaveFunction, q: &BohmianConfiguration) -> Result<f64, CollapseError> {
        let (gain, lambda_max) = self.axis_gain(q)?;
        let full = separable_product(&self.grid, &gain);
        for (c, g) in psi.amplitudes_mut().iter_mut().zip(&full) {
            *c *= g;
        }
        Ok(lambda_max)
    }

    /// Advances the wave function by one step with `Λ` built from `q`; the
    /// positions themselves are not moved. Returns the new state and `max Λ`.
    pub fn step_wave(
        &self,
        psi: &WaveFunction,
        q: &BohmianConfiguration,
    ) -> Result<(WaveFunction, f64), CollapseError> {
        if !psi.grid().same_shape(&self.grid) {
            return Err(crate::error::LatticeError::GridMismatch.into());
        }
        let mut out = psi.clone();
        apply_kinetic(&self.spectral, &self.half_kinetic, &mut out);

        let lambda_max = if self.params.gamma_l != 0.0 {
            let (gain, lambda_max) = self.axis_gain(q)?;
            self.check_stiffness(lambda_max)?;
            let mut diag: Vec<Complex64> = separable_product(&self.grid, &gain)
                .into_iter()
                .map(|g| Complex64::new(g, 0.0))
                .collect();
            if let Some(phase) = &self.potential_phase {
                multiply_all(&mut diag, phase);
            }
            multiply_all(out.amplitudes_mut(), &diag);
            lambda_max
        } else {
            if let Some(phase) = &self.potential_phase {
                multiply_all(out.amplitudes_mut(), phase);
            }
            0.0
        };

        apply_kinetic(&self.spectral, &self.half_kinetic, &mut out);
        let t = psi.time() + self.dt;
        out.set_time(t);
        if !out.is_finite() {
            return Err(CollapseError::NonFinite(t));
        }
        if self.params.renormalize_each_step {
            out = out.normalized()?;
        }
        Ok((out, lambda_max))
    }

    /// Full coupled step: wave function with `Λ` frozen at the start
    /// configuration, then RK4 for the positions between the two states.
    pub fn step(
        &self,
        psi: &WaveFunction,
        q: &BohmianConfiguration,
    ) -> Result<(WaveFunction, BohmianConfiguration, f64), CollapseError> {
        let (next, lambda_max) = self.step_wave(psi, q)?;
        let start = VelocityProbe::new(psi, &self.spectral);
        let end = VelocityProbe::new(&next, &self.spectral);
        let q_next = advance_with(q, &start, &end, self.dt);
        Ok((next, q_next, lambda_max))
    }

    /// Wave step with the positions held fixed (only their time advances).
    pub fn step_frozen(
        &self,
        psi: &WaveFunction,
        q: &BohmianConfiguration,
    ) -> Result<(WaveFunction, BohmianConfiguration, f64), CollapseError> {
        let (next, lambda_max) = self.step_wave(psi, q)?;
        let q_next = BohmianConfiguration::new(&self.grid, q.positions().to_vec(), q.time() + self.dt)?;
        Ok((next, q_next, lambda_max))
    }
}

/// One coupled step with freshly built factors. Prefer [`Propagator`] for loops.
pub fn modified_step(
    psi: &WaveFunction,
    q: &BohmianConfiguration,
    potential: &[f64],
    params: CollapseParams,
    dt: f64,
) -> Result<(WaveFunction, BohmianConfiguration), CollapseError> {
    let prop = Propagator::new(psi.grid(), Some(potential), params, dt)?;
    let (psi, q, _) = prop.step(psi, q)?;
    Ok((psi, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::wavefunction::{branch_weight, gaussian_packet, superpose, Interval, Packet, Region};

    fn two_packet(grid: &Grid, sep: f64, width: f64) -> WaveFunction {
        let l = gaussian_packet(grid, &[Packet::new(-sep / 2.0, width, 0.0)]).unwrap();
        let r = gaussian_packet(grid, &[Packet::new(sep / 2.0, width, 0.0)]).unwrap();
        let h = Complex64::new(0.5f64.sqrt(), 0.0);
        superpose(&[(h, l), (h, r)]).unwrap()
    }

    #[test]
    fn zero_gamma_is_plain_split_step() {
        let grid = build_grid(1, 128, 32.0).unwrap();
        let psi = gaussian_packet(&grid, &[Packet::new(-2.0, 1.0, 1.0)]).unwrap();
        let v: Vec<f64> = grid.coordinates().iter().map(|x| 0.02 * x * x).collect();
        let prop = Propagator::new(&grid, Some(&v), CollapseParams::new(0.0, 1.0, false), 0.01).unwrap();
        let q = BohmianConfiguration::new(&grid, vec![-2.0], 0.0).unwrap();
        let (a, _) = prop.step_wave(&psi, &q).unwrap();

        // reference: kinetic half, potential, kinetic half with no localization at all
        let spectral = Spectral::new(&grid);
        let half = kinetic_factors(&grid, 0.005);
        let mut b = psi.clone();
        apply_kinetic(&spectral, &half, &mut b);
        for (c, x) in b.amplitudes_mut().iter_mut().zip(&v) {
            *c *= Complex64::from_polar(1.0, -x * 0.01);
        }
        apply_kinetic(&spectral, &half, &mut b);
        assert_eq!(a.amplitudes(), b.amplitudes());
        assert!((a.norm_squared() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn localization_keeps_the_phase() {
        let grid = build_grid(1, 128, 32.0).unwrap();
        let psi = gaussian_packet(&grid, &[Packet::new(0.0, 2.0, 0.7)]).unwrap();
        let prop = Propagator::new(&grid, None, CollapseParams::new(0.8, 1.5, false), 0.05).unwrap();
        let q = BohmianConfiguration::new(&grid, vec![0.5], 0.0).unwrap();
        let mut out = psi.clone();
        prop.apply_localization(&mut out, &q).unwrap();
        for (a, b) in psi.amplitudes().iter().zip(out.amplitudes()) {
            if a.norm() > 1e-150 {
                assert!((a.arg() - b.arg()).abs() < 1e-12);
                assert!(b.norm() >= a.norm());
            }
        }
    }

    #[test]
    fn norm_grows_with_localization() {
        let grid = build_grid(1, 64, 16.0).unwrap();
        let psi = gaussian_packet(&grid, &[Packet::new(0.0, 1.0, 0.0)]).unwrap();
        let prop = Propagator::new(&grid, None, CollapseParams::new(0.5, 1.0, false), 0.01).unwrap();
        let q = BohmianConfiguration::new(&grid, vec![0.0], 0.0).unwrap();
        let (out, _) = prop.step_wave(&psi, &q).unwrap();
        assert!(out.norm_squared() > psi.norm_squared());
    }

    #[test]
    fn occupied_branch_gains_weight() {
        let grid = build_grid(1, 256, 64.0).unwrap();
        let psi = two_packet(&grid, 24.0, 1.5);
        let prop = Propagator::new(&grid, None, CollapseParams::new(0.5, 2.0, true), 0.01).unwrap();
        let mut q = BohmianConfiguration::new(&grid, vec![-12.0], 0.0).unwrap();
        let mut psi_t = psi;
        for _ in 0..100 {
            let (p, qn, _) = prop.step(&psi_t, &q).unwrap();
            psi_t = p;
            q = qn;
        }
        let left = Region::new(vec![Interval::new(-32.0, 0.0)]);
        assert!(branch_weight(&psi_t, &left).unwrap() > 0.6);
        assert!((psi_t.norm_squared() - 1.0).abs() < 1e-12);
        assert!((psi_t.time() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refuses_stiff_steps() {
        let grid = build_grid(1, 64, 16.0).unwrap();
        let psi = gaussian_packet(&grid, &[Packet::new(0.0, 1.0, 0.0)]).unwrap();
        let prop = Propagator::new(&grid, None, CollapseParams::new(50.0, 1.0, false), 0.1).unwrap();
        let q = BohmianConfiguration::new(&grid, vec![0.0], 0.0).unwrap();
        assert!(matches!(prop.step(&psi, &q), Err(CollapseError::StepTooLarge(_))));
    }

    #[test]
    fn rejects_bad_inputs() {
        let grid = build_grid(1, 64, 16.0).unwrap();
        let p = CollapseParams::new(0.1, 1.0, false);
        assert!(Propagator::new(&grid, None, p, 0.0).is_err());
        assert!(Propagator::new(&grid, Some(&[0.0; 3]), p, 0.1).is_err());
    }
}
