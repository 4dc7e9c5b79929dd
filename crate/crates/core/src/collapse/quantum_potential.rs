//! Quantum potential `Q = -½ Σ_n Δ_n|Ψ| / |Ψ|`, a diagnostic of the phase equation.

use num_complex::Complex64;

use crate::bohmian::NODE_THRESHOLD;
use crate::spectral::Spectral;
use crate::wavefunction::WaveFunction;

/// Spectral Laplacian of the modulus over the modulus. At nodes the value is
/// clamped to `±N k_max²/2`, the largest kinetic energy the grid represents.
pub fn quantum_potential(psi: &WaveFunction) -> Vec<f64> {
    let grid = *psi.grid();
    let m = grid.points();
    let spectral = Spectral::new(&grid);
    let modulus: Vec<f64> = psi.amplitudes().iter().map(|c| c.norm()).collect();
    let floor = NODE_THRESHOLD * psi.max_density();
    let limit = 0.5 * grid.particles() as f64 * grid.nyquist().powi(2);

    let mut laplacian = vec![0.0; grid.len()];
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    for axis in 0..grid.particles() {
        let stride = grid.stride(axis);
        let block = stride * m;
        for base in (0..grid.len()).step_by(block) {
            for start in base..base + stride {
                for (j, c) in line.iter_mut().enumerate() {
                    *c = Complex64::new(modulus[start + j * stride], 0.0);
                }
                spectral.second_derivative_line(&mut line);
                for (j, c) in line.iter().enumerate() {
                    laplacian[start + j * stride] += c.re;
                }
            }
        }
    }

    laplacian
        .iter()
        .zip(&modulus)
        .map(|(&lap, &r)| {
            let q = -0.5 * lap / r;
            if !q.is_finite() {
                0.0
            } else if r * r < floor {
                q.clamp(-limit, limit)
            } else {
                q
            }
        })
        .collect()
}
