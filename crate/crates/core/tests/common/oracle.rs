//! Dense direct integration of the coupled single-particle equations.
//!
//! The Hamiltonian is assembled as a full matrix from the trigonometric
//! interpolant, and `(ψ, q)` advance together by classical RK4 with the
//! localization term re-evaluated at every stage. Nothing here goes through
//! the FFT propagator or the trajectory integrator under test.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;

pub struct DenseOracle {
    pub x: Vec<f64>,
    k: Vec<f64>,
    box_length: f64,
    h: DMatrix<C>,
    gamma: f64,
    a_l: f64,
}

impl DenseOracle {
    pub fn new(m: usize, box_length: f64, v: impl Fn(f64) -> f64, gamma: f64, a_l: f64) -> Self {
        let dx = box_length / m as f64;
        let x: Vec<f64> = (0..m).map(|j| -0.5 * box_length + j as f64 * dx).collect();
        let k: Vec<f64> = (0..m)
            .map(|i| {
                let n = if i < m / 2 { i as f64 } else { i as f64 - m as f64 };
                2.0 * PI * n / box_length
            })
            .collect();
        let mut h = DMatrix::from_element(m, m, C::new(0.0, 0.0));
        for a in 0..m {
            for b in 0..m {
                let mut s = C::new(0.0, 0.0);
                for &kk in &k {
                    s += C::from_polar(0.5 * kk * kk, kk * (x[a] - x[b]));
                }
                h[(a, b)] = s / m as f64;
            }
            h[(a, a)] += v(x[a]);
        }
        Self {
            x,
            k,
            box_length,
            h,
            gamma,
            a_l,
        }
    }

    pub fn state(&self, f: impl Fn(f64) -> C) -> DVector<C> {
        DVector::from_iterator(self.x.len(), self.x.iter().map(|&x| f(x)))
    }

    fn min_image(&self, d: f64) -> f64 {
        d - self.box_length * (d / self.box_length).round()
    }

    fn coefficients(&self, psi: &DVector<C>) -> Vec<C> {
        let m = psi.len();
        self.k
            .iter()
            .map(|&kk| {
                let mut c = C::new(0.0, 0.0);
                for j in 0..m {
                    c += psi[j] * C::from_polar(1.0, -kk * self.x[j]);
                }
                c / m as f64
            })
            .collect()
    }

    /// `Im(ψ'/ψ)` of the trigonometric interpolant at `q`; the Nyquist mode
    /// enters the value as a cosine and has no derivative.
    pub fn velocity(&self, psi: &DVector<C>, q: f64) -> f64 {
        let m = psi.len();
        let mut val = C::new(0.0, 0.0);
        let mut der = C::new(0.0, 0.0);
        for (i, (c, &kk)) in self.coefficients(psi).iter().zip(&self.k).enumerate() {
            if i == m / 2 {
                val += c * (kk * q).cos();
            } else {
                let e = C::from_polar(1.0, kk * q);
                val += c * e;
                der += c * e * C::new(0.0, kk);
            }
        }
        (der / val).im
    }

    fn rhs_wave(&self, psi: &DVector<C>, q: f64) -> DVector<C> {
        let mut d = &self.h * psi * C::new(0.0, -1.0);
        for j in 0..psi.len() {
            let r = self.min_image(self.x[j] - q) / self.a_l;
            d[j] += psi[j] * self.gamma * (-r * r).exp();
        }
        d
    }

    fn rhs(&self, psi: &DVector<C>, q: f64) -> (DVector<C>, f64) {
        (self.rhs_wave(psi, q), self.velocity(psi, q))
    }

    pub fn step(&self, psi: &DVector<C>, q: f64, dt: f64) -> (DVector<C>, f64) {
        let half = C::from(0.5 * dt);
        let (k1, v1) = self.rhs(psi, q);
        let (k2, v2) = self.rhs(&(psi + &k1 * half), q + 0.5 * dt * v1);
        let (k3, v3) = self.rhs(&(psi + &k2 * half), q + 0.5 * dt * v2);
        let (k4, v4) = self.rhs(&(psi + &k3 * C::from(dt)), q + dt * v3);
        let next = psi + (k1 + k2 * C::from(2.0) + k3 * C::from(2.0) + k4) * C::from(dt / 6.0);
        let q_next = q + dt / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
        (next, self.min_image(q_next))
    }

    /// RK4 for the wave function alone, with the localization centered on a
    /// fixed `q`.
    pub fn step_fixed(&self, psi: &DVector<C>, q: f64, dt: f64) -> DVector<C> {
        let f = |p: &DVector<C>| self.rhs_wave(p, q);
        let k1 = f(psi);
        let k2 = f(&(psi + &k1 * C::from(0.5 * dt)));
        let k3 = f(&(psi + &k2 * C::from(0.5 * dt)));
        let k4 = f(&(psi + &k3 * C::from(dt)));
        psi + (k1 + k2 * C::from(2.0) + k3 * C::from(2.0) + k4) * C::from(dt / 6.0)
    }

    /// Exact `∫_a^b |interpolant|²`.
    pub fn interval_weight(&self, psi: &DVector<C>, a: f64, b: f64) -> f64 {
        let coeffs = self.coefficients(psi);
        let mut total = C::new(0.0, 0.0);
        for (c1, &k1) in coeffs.iter().zip(&self.k) {
            for (c2, &k2) in coeffs.iter().zip(&self.k) {
                let dk = k1 - k2;
                let integral = if dk.abs() < 1e-12 {
                    C::new(b - a, 0.0)
                } else {
                    (C::from_polar(1.0, dk * b) - C::from_polar(1.0, dk * a)) / C::new(0.0, dk)
                };
                total += c1 * c2.conj() * integral;
            }
        }
        total.re
    }
}
