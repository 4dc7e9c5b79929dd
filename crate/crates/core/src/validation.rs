//! Desk-scale self-check of the simulator's invariants.
//!
//! `quick` runs in well under a minute on one core; `full` adds the 500-run
//! Born-rule ensembles and the three-particle stabilization run.

use std::fmt;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::bohmian::{smoothed_density, velocity_field, BohmianConfiguration, SmoothedDensity, NODE_THRESHOLD};
use crate::collapse::rates::SiValue;
use crate::collapse::{run_realization_with, Propagator, RunOptions, RunRecord};
use crate::config::{parse_scenario_str, ScenarioConfig};
use crate::ensemble::{fit_collapse_rate, library, run_ensemble, run_ensemble_with, EnsembleOptions};
use crate::grid::build_grid;
use crate::rate_table::{evaluate_row, parse_rate_params};
use crate::snapshot::{read_snapshot, write_snapshot};
use crate::wavefunction::{gaussian_packet, Packet, WaveFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Quick,
    Full,
}

impl std::str::FromStr for Level {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            other => Err(format!("unknown level {other:?}; use quick or full")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {:<28} {} ({:.2} s)", self.name, self.detail, self.seconds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub level: Level,
    pub fault_injected: bool,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

type Outcome = Result<(bool, String), String>;

struct Suite {
    fault: bool,
    checks: Vec<CheckResult>,
}

impl Suite {
    fn check(&mut self, name: &str, f: impl FnOnce(bool) -> Outcome) {
        let started = Instant::now();
        let (passed, detail) = match f(self.fault) {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        let result = CheckResult {
            name: name.to_string(),
            passed,
            detail,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!("{result}");
        self.checks.push(result);
    }
}

/// Runs the checks of `level`. With `inject_fault` the sign of `γ_L` is
/// flipped inside every propagator, which the branch-dominance check must
/// catch.
pub fn validate_suite(level: Level, inject_fault: bool) -> ValidationReport {
    let mut s = Suite {
        fault: inject_fault,
        checks: Vec::new(),
    };
    s.check("free-spreading", check_free_spreading);
    s.check("real-state-velocity", |_| check_real_velocity());
    s.check("smoothed-density", |_| check_smoothed_density());
    s.check("branch-dominance", check_branch_dominance);
    s.check("wide-localization-limit", check_wide_localization);
    s.check("ray-equivalence", check_ray_equivalence);
    s.check("rate-fit-sign", check_rate_sign);
    s.check("rate-scaling", check_rate_scaling);
    s.check("equivariance", |_| check_equivariance());
    s.check("no-collapse-unresolved", check_unresolved);
    s.check("thread-determinism", check_determinism);
    s.check("rate-table", |_| check_rate_table());
    s.check("round-trips", |_| check_round_trips());
    if level == Level::Full {
        for p in [0.7, 0.5, 0.3] {
            s.check(&format!("born-rule-{p}"), |fault| check_born(p, fault));
        }
        s.check("stabilization", |fault| check_stabilization(true, fault));
    }
    ValidationReport {
        level,
        fault_injected: inject_fault,
        checks: s.checks,
    }
}

fn err(e: impl ToString) -> String {
    e.to_string()
}

fn options(fault: bool) -> RunOptions {
    RunOptions {
        inject_sign_fault: fault,
        keep_final_state: false,
    }
}

fn second_moment(psi: &WaveFunction) -> f64 {
    let xs = psi.grid().coordinates();
    let (mut num, mut den) = (0.0, 0.0);
    for (x, c) in xs.iter().zip(psi.amplitudes()) {
        num += x * x * c.norm_sqr();
        den += c.norm_sqr();
    }
    num / den
}

fn check_free_spreading(fault: bool) -> Outcome {
    let sc = library::free_gaussian();
    let sigma = 1.0;
    let (mut worst_width, mut worst_norm) = (0.0f64, 0.0f64);
    let mut norm0 = None;
    run_realization_with(&sc, 0, options(fault), &mut |_, psi, _| {
        let t = psi.time();
        let expected = sigma * sigma + t * t / (4.0 * sigma * sigma);
        worst_width = worst_width.max((second_moment(psi) / expected - 1.0).abs());
        let n = psi.norm_squared();
        let n0 = *norm0.get_or_insert(n);
        worst_norm = worst_norm.max((n - n0).abs());
    })
    .map_err(err)?;
    Ok((
        worst_width < 1e-6 && worst_norm < 1e-10,
        format!("width² rel err {worst_width:.2e}, norm drift {worst_norm:.2e}"),
    ))
}

fn check_real_velocity() -> Outcome {
    let grid = build_grid(2, 64, 32.0).map_err(err)?;
    let psi = WaveFunction::from_fn(grid, |x| {
        let r = (-(x[0] - 1.0).powi(2) - 0.5 * (x[1] + 2.0).powi(2)).exp();
        Complex64::new(r * (0.7 * x[0]).cos(), 0.0)
    })
    .map_err(err)?;
    // sub-floor sites are clamped, not zeroed
    let floor = NODE_THRESHOLD * psi.max_density();
    let field = velocity_field(&psi);
    let mut v: f64 = 0.0;
    for comp in field.components() {
        for (x, c) in comp.iter().zip(psi.amplitudes()) {
            if c.norm_sqr() >= floor {
                v = v.max(x.abs());
            }
        }
    }
    Ok((v < 1e-8, format!("max |v| above the node floor {v:.2e}")))
}

fn check_smoothed_density() -> Outcome {
    let grid = build_grid(3, 64, 32.0).map_err(err)?;
    let a_l = 1.5;
    let q = [-3.3, 7.1, 12.9];
    let nb = SmoothedDensity::evaluate;
    let mut worst: f64 = 0.0;
    for r in [-15.0, -3.0, 0.25, 9.0] {
        let base = nb(&grid, &q, a_l, r);
        let relabeled = nb(&grid, &[q[2], q[0], q[1]], a_l, r);
        let shifted: Vec<f64> = q.iter().map(|x| grid.wrap(x + 5.5)).collect();
        let translated = nb(&grid, &shifted, a_l, grid.wrap(r + 5.5));
        worst = worst.max((base - relabeled).abs()).max((base - translated).abs());
    }
    // separated bumps: peak one, tiny in between
    let spaced = [-12.0, 0.0, 12.0];
    let config = BohmianConfiguration::new(&grid, spaced.to_vec(), 0.0).map_err(err)?;
    let field = smoothed_density(&config, &grid, 1.0).map_err(err)?;
    let peak = (field.max() - 1.0).abs();
    let midway = nb(&grid, &spaced, 1.0, 6.0);
    Ok((
        worst < 1e-12 && peak < 1e-12 && midway < 1e-7,
        format!("invariance {worst:.1e}, peak err {peak:.1e}, midway {midway:.1e}"),
    ))
}

fn check_branch_dominance(fault: bool) -> Outcome {
    let sc = library::branch_dominance();
    let gamma = sc.collapse.gamma_l;
    let delta = library::branch_dominance_delta_lambda();
    let rec = run_realization_with(&sc, 0, options(fault), &mut |_, _, _| {}).map_err(err)?;
    let r0 = rec.samples[0].branch_weights[0] / rec.samples[0].branch_weights[1];
    let mut worst: f64 = 0.0;
    for s in &rec.samples {
        let ratio = s.branch_weights[0] / s.branch_weights[1];
        let expected = r0 * (2.0 * gamma * delta * s.time).exp();
        worst = worst.max((ratio / expected - 1.0).abs());
    }
    Ok((worst < 1e-6, format!("worst relative error {worst:.2e}")))
}

fn lockstep(
    sc: &ScenarioConfig,
    fault: bool,
    mut compare: impl FnMut(usize, &WaveFunction, &WaveFunction, &BohmianConfiguration, &BohmianConfiguration),
    other: crate::collapse::CollapseParams,
) -> Result<(), String> {
    let grid = sc.grid().map_err(err)?;
    let pot = sc.potential_field(&grid);
    let mut a_prop = Propagator::new(&grid, pot.as_deref(), sc.collapse, sc.time.dt).map_err(err)?;
    let mut b_prop = Propagator::new(&grid, pot.as_deref(), other, sc.time.dt).map_err(err)?;
    if fault {
        a_prop.inject_sign_fault();
        b_prop.inject_sign_fault();
    }
    let psi0 = sc.initial_state().map_err(err)?;
    let q0 = sc
        .initial_positions()
        .map_err(err)?
        .ok_or("scenario needs fixed positions")?;
    let (mut pa, mut qa) = (psi0.clone(), q0.clone());
    let (mut pb, mut qb) = (psi0, q0);
    for step in 1..=sc.steps() {
        (pa, qa, _) = a_prop.step(&pa, &qa).map_err(err)?;
        (pb, qb, _) = b_prop.step(&pb, &qb).map_err(err)?;
        compare(step, &pa, &pb, &qa, &qb);
    }
    Ok(())
}

fn check_wide_localization(fault: bool) -> Outcome {
    let sc = library::wide_localization(1.0);
    let free = crate::collapse::CollapseParams::new(0.0, sc.collapse.a_l, true);
    let mut worst: f64 = 0.0;
    lockstep(
        &sc,
        fault,
        |_, a, b, _, _| worst = worst.max(a.max_deviation(b).unwrap_or(f64::INFINITY)),
        free,
    )?;
    Ok((worst < 1e-8, format!("max amplitude deviation {worst:.2e}")))
}

fn check_ray_equivalence(fault: bool) -> Outcome {
    let mut sc = library::collapse_rate();
    sc.collapse.renormalize_each_step = true;
    let raw = crate::collapse::CollapseParams::new(sc.collapse.gamma_l, sc.collapse.a_l, false);
    let (mut worst_ratio, mut worst_q) = (0.0f64, 0.0f64);
    lockstep(
        &sc,
        fault,
        |step, a, b, qa, qb| {
            let d = b
                .normalized()
                .and_then(|b| a.max_deviation(&b))
                .unwrap_or(f64::INFINITY);
            worst_ratio = worst_ratio.max(d / (1e-10 * step as f64));
            for (x, y) in qa.positions().iter().zip(qb.positions()) {
                worst_q = worst_q.max((x - y).abs());
            }
        },
        raw,
    )?;
    Ok((
        worst_ratio <= 1.0 && worst_q < 1e-8,
        format!("deviation / (1e-10·step) ≤ {worst_ratio:.2e}, position diff {worst_q:.1e}"),
    ))
}

fn fitted_rate(sc: &ScenarioConfig, fault: bool) -> Result<f64, String> {
    let rec: RunRecord = run_realization_with(sc, 0, options(fault), &mut |_, _, _| {}).map_err(err)?;
    if let Some(f) = &rec.failure {
        return Err(f.clone());
    }
    Ok(fit_collapse_rate(&rec, 0, 1).map_err(err)?.rate)
}

fn check_rate_sign(fault: bool) -> Outcome {
    let rate = fitted_rate(&library::collapse_rate(), fault)?;
    Ok((rate > 0.0, format!("fitted rate {rate:.4}")))
}

fn check_rate_scaling(fault: bool) -> Outcome {
    let one = fitted_rate(&library::clustered(1), fault)?;
    let two = fitted_rate(&library::clustered(2), fault)?;
    let ratio = two / one;
    Ok((
        one > 0.0 && (ratio - 4.0).abs() <= 0.4,
        format!("rates {one:.4} and {two:.4}, ratio {ratio:.3}"),
    ))
}

fn check_equivariance() -> Outcome {
    let summary = run_ensemble(&library::equivariance(10_000, 7)).map_err(err)?;
    let last = summary.equivariance.last().ok_or("no equivariance samples")?;
    let worst = summary.equivariance.iter().map(|p| p.distance).fold(0.0f64, f64::max);
    Ok((
        worst < 0.05,
        format!("L1 at t = {:.2} is {:.4}, worst {worst:.4}", last.time, last.distance),
    ))
}

fn check_unresolved(fault: bool) -> Outcome {
    let mut sc = library::born_rule(0.7, 50, 3);
    sc.collapse.gamma_l = 0.0;
    sc.time.duration = 2.0;
    let opts = EnsembleOptions {
        inject_sign_fault: fault,
        keep_records: false,
    };
    let s = run_ensemble_with(&sc, opts).map_err(err)?.summary;
    let counted: usize = s.branches.iter().map(|b| b.count).sum::<usize>() + s.unresolved + s.failed;
    Ok((
        s.unresolved == 50 && counted == 50,
        format!("{} of 50 unresolved", s.unresolved),
    ))
}

fn check_determinism(fault: bool) -> Outcome {
    let mut sc = library::born_rule(0.5, 8, 11);
    sc.time.duration = 1.0;
    let opts = EnsembleOptions {
        inject_sign_fault: fault,
        keep_records: false,
    };
    let run = |threads: usize| -> Result<_, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(err)?;
        pool.install(|| run_ensemble_with(&sc, opts))
            .map(|r| r.summary.without_metadata())
            .map_err(err)
    };
    let a = run(1)?;
    let b = run(3)?;
    Ok((a == b, "1 vs 3 threads".into()))
}

fn check_rate_table() -> Outcome {
    let rows = parse_rate_params(
        r#"
[[rows]]
label = "pointer"
formula = "macroscopic"
inputs = { gamma_L = "1e-16", N_B = "1e11", N_P = "1e20" }

[[rows]]
label = "bec"
formula = "macroscopic"
inputs = { gamma_L = "1e-16", N_B = "1e5", N_P = "1e5" }

[[rows]]
label = "hydrogen"
formula = "microscopic"
inputs = { gamma_L = "1e-16", a0_over_a_L = "1e-4" }

[[rows]]
label = "molecule"
formula = "microscopic"
inputs = { gamma_L = "1e-16", a0_over_a_L = "1e-2" }
"#,
    )
    .map_err(err)?;
    let expected = [(15, 0), (-6, 0), (-24, 2), (-20, 2)];
    let mut ok = true;
    let mut shown = Vec::new();
    for (row, (exp, power)) in rows.iter().zip(expected) {
        let e = evaluate_row(row).map_err(err)?;
        ok &= e.rate.coefficient == SiValue::pow10(exp) && e.rate.n_power == power;
        shown.push(e.rate.to_string());
    }
    Ok((ok, shown.join(", ")))
}

fn check_round_trips() -> Outcome {
    let mut ok = true;
    for sc in library::all() {
        let again = parse_scenario_str(&sc.to_toml(), &[]).map_err(err)?;
        ok &= again == sc;
    }
    let grid = build_grid(2, 64, 32.0).map_err(err)?;
    let psi = gaussian_packet(&grid, &[Packet::new(0.3, 2.0, 0.7), Packet::new(-1.0, 2.5, -0.2)])
        .map_err(err)?
        .with_time(0.125);
    let mut buf = Vec::new();
    write_snapshot(&psi, &mut buf).map_err(err)?;
    let back = read_snapshot(&buf[..]).map_err(err)?;
    let bit_exact = back.time().to_bits() == psi.time().to_bits()
        && back
            .amplitudes()
            .iter()
            .zip(psi.amplitudes())
            .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
    ok &= bit_exact;
    Ok((ok, "config and snapshot".into()))
}

fn check_born(p: f64, fault: bool) -> Outcome {
    let sc = library::born_rule(p, 500, 2024);
    let opts = EnsembleOptions {
        inject_sign_fault: fault,
        keep_records: false,
    };
    let s = run_ensemble_with(&sc, opts).map_err(err)?.summary;
    let left = s.branch("left").ok_or("missing left branch")?;
    let band = 3.0 * (p * (1.0 - p) / 500.0).sqrt();
    let ok = (left.fraction - p).abs() <= band && s.uniqueness_violations == 0 && s.failed == 0;
    Ok((
        ok,
        format!(
            "left {}/500 = {:.3} (target {p} ± {band:.3}), unresolved {}, violations {}",
            left.count, left.fraction, s.unresolved, s.uniqueness_violations
        ),
    ))
}

/// The branch holding the third particle's position must reach weight
/// `1 - 1e-6`.
pub fn check_stabilization(environment: bool, fault: bool) -> Outcome {
    let sc = library::stabilization(environment);
    let rec = run_realization_with(&sc, 0, options(fault), &mut |_, _, _| {}).map_err(err)?;
    if let Some(f) = &rec.failure {
        return Err(f.clone());
    }
    let matched = sc.branch_index("matched").ok_or("missing matched branch")?;
    let mismatched = sc.branch_index("mismatched").ok_or("missing mismatched branch")?;
    let last = rec.last();
    let reached = rec
        .samples
        .iter()
        .find(|s| s.branch_weights[matched] > 1.0 - 1e-6)
        .map(|s| s.time);
    Ok((
        last.branch_weights[matched] > 1.0 - 1e-6,
        format!(
            "final mismatched weight {:.2e}, threshold first crossed at t = {}",
            last.branch_weights[mismatched],
            reached.map_or("never".to_string(), |t| format!("{t:.1}"))
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_parsing() {
        assert_eq!("quick".parse::<Level>().unwrap(), Level::Quick);
        assert_eq!("full".parse::<Level>().unwrap(), Level::Full);
        assert!("fast".parse::<Level>().is_err());
    }

    #[test]
    fn cheap_checks_pass() {
        for f in [
            check_real_velocity,
            check_smoothed_density,
            check_rate_table,
            check_round_trips,
        ] {
            let (ok, detail) = f().unwrap();
            assert!(ok, "{detail}");
        }
        let (ok, detail) = check_free_spreading(false).unwrap();
        assert!(ok, "{detail}");
    }

    #[test]
    fn report_line_format() {
        let c = CheckResult {
            name: "x".into(),
            passed: false,
            detail: "d".into(),
            seconds: 0.5,
        };
        assert!(c.to_string().starts_with("FAIL x "));
    }
}
