//! RK4 integration of the guidance equation across one time step.

use super::velocity::{VelocityProbe, VelocitySource};
use super::{BohmianConfiguration, BohmianError};
use crate::grid::MAX_PARTICLES;
use crate::spectral::Spectral;
use crate::wavefunction::WaveFunction;

/// Velocity at `point` for the fraction `theta` of the way from `start` to `end`.
pub fn interpolate_velocity(
    start: &dyn VelocitySource,
    end: &dyn VelocitySource,
    theta: f64,
    point: &[f64],
    out: &mut [f64],
) {
    let n = point.len();
    let mut a = [0.0; MAX_PARTICLES];
    let mut b = [0.0; MAX_PARTICLES];
    start.velocity_at(point, &mut a);
    end.velocity_at(point, &mut b);
    for i in 0..n {
        out[i] = (1.0 - theta) * a[i] + theta * b[i];
    }
}

/// One RK4 step of `dq/dt = v(q, t)` with `v` linear in time between the two sources.
pub fn advance_with(
    q: &BohmianConfiguration,
    start: &dyn VelocitySource,
    end: &dyn VelocitySource,
    dt: f64,
) -> BohmianConfiguration {
    let grid = *start.grid();
    let n = q.particles();
    let q0 = q.positions();
    let mut k = [[0.0; MAX_PARTICLES]; 4];
    let mut probe = [0.0; MAX_PARTICLES];

    interpolate_velocity(start, end, 0.0, q0, &mut k[0]);
    for i in 0..n {
        probe[i] = q0[i] + 0.5 * dt * k[0][i];
    }
    interpolate_velocity(start, end, 0.5, &probe[..n], &mut k[1]);
    for i in 0..n {
        probe[i] = q0[i] + 0.5 * dt * k[1][i];
    }
    interpolate_velocity(start, end, 0.5, &probe[..n], &mut k[2]);
    for i in 0..n {
        probe[i] = q0[i] + dt * k[2][i];
    }
    interpolate_velocity(start, end, 1.0, &probe[..n], &mut k[3]);

    let positions = (0..n)
        .map(|i| {
            let dq = dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
            grid.wrap(q0[i] + dq)
        })
        .collect();
    BohmianConfiguration {
        positions,
        time: q.time() + dt,
    }
}

/// Advances `q` from `psi_start` to `psi_end`, which must be `dt` apart in time.
pub fn advance_positions(
    q: &BohmianConfiguration,
    psi_start: &WaveFunction,
    psi_end: &WaveFunction,
    dt: f64,
) -> Result<BohmianConfiguration, BohmianError> {
    let grid = psi_start.grid();
    if !grid.same_shape(psi_end.grid()) {
        return Err(crate::error::LatticeError::GridMismatch.into());
    }
    if q.particles() != grid.particles() {
        return Err(BohmianError::Arity {
            expected: grid.particles(),
            got: q.particles(),
        });
    }
    let expected = psi_start.time() + dt;
    let tol = 1e-9 * expected.abs().max(1.0);
    if (psi_end.time() - expected).abs() > tol {
        return Err(BohmianError::TimeMismatch {
            start: psi_start.time(),
            end: psi_end.time(),
            dt,
        });
    }
    let spectral = Spectral::new(grid);
    let start = VelocityProbe::new(psi_start, &spectral);
    let end = VelocityProbe::new(psi_end, &spectral);
    Ok(advance_with(q, &start, &end, dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::wavefunction::{gaussian_packet, Packet};
    use num_complex::Complex64;

    #[test]
    fn plane_wave_translates() {
        let grid = build_grid(1, 64, 2.0 * std::f64::consts::PI).unwrap();
        let psi = WaveFunction::from_fn(grid, |x| Complex64::from_polar(1.0, 2.0 * x[0])).unwrap();
        let later = psi.clone().with_time(0.1);
        let q = BohmianConfiguration::new(&grid, vec![0.3], 0.0).unwrap();
        let q1 = advance_positions(&q, &psi, &later, 0.1).unwrap();
        assert!((q1.positions()[0] - 0.5).abs() < 1e-9);
        assert!((q1.time() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn real_state_keeps_positions() {
        let grid = build_grid(2, 64, 16.0).unwrap();
        let psi = gaussian_packet(&grid, &[Packet::new(0.0, 1.0, 0.0), Packet::new(1.0, 1.0, 0.0)]).unwrap();
        let later = psi.clone().with_time(0.05);
        let q = BohmianConfiguration::new(&grid, vec![0.7, 1.3], 0.0).unwrap();
        let q1 = advance_positions(&q, &psi, &later, 0.05).unwrap();
        for (a, b) in q1.positions().iter().zip(q.positions()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_inconsistent_times() {
        let grid = build_grid(1, 32, 8.0).unwrap();
        let psi = gaussian_packet(&grid, &[Packet::new(0.0, 1.0, 0.0)]).unwrap();
        let q = BohmianConfiguration::new(&grid, vec![0.0], 0.0).unwrap();
        let err = advance_positions(&q, &psi, &psi.clone().with_time(0.2), 0.1);
        assert!(matches!(err, Err(BohmianError::TimeMismatch { .. })));
    }

    #[test]
    fn wraps_across_the_boundary() {
        let grid = build_grid(1, 64, 2.0 * std::f64::consts::PI).unwrap();
        let psi = WaveFunction::from_fn(grid, |x| Complex64::from_polar(1.0, 4.0 * x[0])).unwrap();
        let q = BohmianConfiguration::new(&grid, vec![3.0], 0.0).unwrap();
        let q1 = advance_positions(&q, &psi, &psi.clone().with_time(0.1), 0.1).unwrap();
        let expected = 3.4 - 2.0 * std::f64::consts::PI;
        assert!((q1.positions()[0] - expected).abs() < 1e-9);
    }
}
