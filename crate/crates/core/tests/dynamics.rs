//! Coupled dynamics against closed forms and the dense oracle.

mod common;

use common::oracle::DenseOracle;
use num_complex::Complex64 as C;

use qcollapse::bohmian::BohmianConfiguration;
use qcollapse::collapse::{run_realization, CollapseParams, Propagator};
use qcollapse::config::parse_scenario_str;
use qcollapse::ensemble::library;
use qcollapse::grid::build_grid;
use qcollapse::wavefunction::{gaussian_packet, superpose, Packet, WaveFunction};

/// Bohmian position in a free Gaussian of initial standard deviation `sigma`
/// centered at the origin.
fn free_trajectory(q0: f64, sigma: f64, t: f64) -> f64 {
    q0 * (1.0 + t * t / (4.0 * sigma.powi(4))).sqrt()
}

#[test]
fn oracle_follows_free_gaussian_trajectory() {
    let sigma = 1.0;
    let oracle = DenseOracle::new(96, 48.0, |_| 0.0, 0.0, 1.0);
    let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25);
    let mut psi = oracle.state(|x| C::new(norm * (-x * x / (4.0 * sigma * sigma)).exp(), 0.0));
    let q0 = 0.4;
    let mut q = q0;
    let dt = 0.01;
    let w0 = oracle.interval_weight(&psi, -24.0, 24.0);
    for _ in 0..150 {
        (psi, q) = oracle.step(&psi, q, dt);
    }
    let expected = free_trajectory(q0, sigma, 1.5);
    assert!((q - expected).abs() < 1e-4, "q = {q}, expected {expected}");
    let w1 = oracle.interval_weight(&psi, -24.0, 24.0);
    assert!((w0 - 1.0).abs() < 1e-6);
    assert!((w1 - w0).abs() < 1e-8, "weight drift {}", w1 - w0);
}

#[test]
fn production_follows_free_gaussian_trajectory() {
    let sc = library::free_gaussian();
    let rec = run_realization(&sc, 0).unwrap();
    assert!(!rec.is_partial());
    for s in &rec.samples {
        let expected = free_trajectory(0.3, 1.0, s.time);
        assert!(
            (s.positions[0] - expected).abs() < 1e-6,
            "t = {}: {} vs {expected}",
            s.time,
            s.positions[0]
        );
    }
    assert!((rec.last().time - 2.0).abs() < 1e-12);
}

#[test]
fn norm_is_conserved_without_localization() {
    let mut sc = library::collapse_rate();
    sc.collapse = CollapseParams::new(0.0, 2.0, false);
    sc.time.duration = 5.0;
    let rec = run_realization(&sc, 0).unwrap();
    for s in &rec.samples {
        assert!((s.norm - 1.0).abs() < 1e-9, "norm {} at t = {}", s.norm, s.time);
        assert!((s.branch_weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

/// Two packets in a double well on the oracle's 64-point axis.
fn convergence_setup() -> (WaveFunction, Vec<f64>, f64) {
    let grid = build_grid(1, 64, 32.0).unwrap();
    let left = gaussian_packet(&grid, &[Packet::new(-8.0, 2.0, 0.3)]).unwrap();
    let right = gaussian_packet(&grid, &[Packet::new(8.0, 2.0, -0.2)]).unwrap();
    let psi = superpose(&[(C::new(1.0, 0.0), left), (C::new(0.6, 0.4), right)]).unwrap();
    let v = grid
        .coordinates()
        .iter()
        .map(|x| {
            let u = x / 8.0;
            0.125 * (u * u - 1.0).powi(2)
        })
        .collect();
    (psi, v, -7.0)
}

#[test]
fn split_step_is_second_order_in_dt() {
    let (psi0, v, q) = convergence_setup();
    let grid = *psi0.grid();
    let params = CollapseParams::new(0.5, 2.0, false);
    let duration: f64 = 1.0;

    let oracle = DenseOracle::new(
        64,
        32.0,
        |x| {
            let u = x / 8.0;
            0.125 * (u * u - 1.0).powi(2)
        },
        params.gamma_l,
        params.a_l,
    );
    let amps = psi0.amplitudes().to_vec();
    let mut reference = oracle.state(|x| amps[grid.cell_index(x)]);
    let fine = 0.001;
    for _ in 0..(duration / fine).round() as usize {
        reference = oracle.step_fixed(&reference, q, fine);
    }

    let errors: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| {
            let prop = Propagator::new(&grid, Some(&v), params, dt).unwrap();
            let mut psi = psi0.clone();
            let mut config = BohmianConfiguration::new(&grid, vec![q], 0.0).unwrap();
            for _ in 0..(duration / dt).round() as usize {
                (psi, config, _) = prop.step_frozen(&psi, &config).unwrap();
            }
            assert_eq!(config.positions(), &[q]);
            psi.amplitudes()
                .iter()
                .zip(reference.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    for pair in errors.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((3.5..4.5).contains(&ratio), "errors {errors:?}, ratio {ratio}");
    }
}

#[test]
fn long_collapse_leaves_the_occupied_branch() {
    // a barrier high enough that tunnelling does not refill the empty well,
    // with packets at the ground-state width of each well
    let text = library::collapse_rate()
        .to_toml()
        .replace("barrier = 0.125", "barrier = 2.0")
        .replace("width = 2.0", "width = 1.0");
    let mut sc = parse_scenario_str(&text, &[]).unwrap();
    sc.time.duration = 30.0;
    sc.time.record_stride = 200;
    let rec = run_realization(&sc, 0).unwrap();
    assert!(!rec.is_partial());
    let last = rec.last();
    let occupied = last.branch_weights[0] / last.branch_weights.iter().sum::<f64>();
    assert!(occupied > 1.0 - 1e-6, "occupied fraction {occupied}");
    assert!(
        last.positions[0] < 0.0,
        "position {} left the occupied well",
        last.positions[0]
    );
    assert!(
        last.norm > 1.0,
        "norm should grow under localization, got {}",
        last.norm
    );
}
