//! Parallel execution of many realizations and order-independent aggregation.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::equivariance::{equivariance_distance, MIN_REALIZATIONS};
use super::fit::{fit_collapse_rate, RateFit, RATE_CONVENTION};
use super::seeds::realization_seed;
use super::EnsembleError;
use crate::bohmian::{
    advance_with, sample_quantum_equilibrium, smoothed_density, velocity_field_with, BohmianConfiguration,
    EquilibriumSampler,
};
use crate::collapse::{run_realization_with, Propagator, RunOptions, RunRecord, RunSample};
use crate::config::ScenarioConfig;
use crate::wavefunction::{branch_weight, WaveFunction};

#[derive(Debug, Clone, Copy, Default)]
pub struct EnsembleOptions {
    pub inject_sign_fault: bool,
    /// Keep every per-run time series (memory grows with size × samples).
    pub keep_records: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub index: usize,
    pub seed: u64,
    pub winner: Option<String>,
    pub final_weights: Vec<f64>,
    pub initial_positions: Vec<f64>,
    pub final_positions: Vec<f64>,
    /// First recorded time at which the winner crossed the threshold.
    pub decision_time: Option<f64>,
    pub decision_positions: Option<Vec<f64>>,
    /// Whether the winner's region held the configuration at decision time.
    pub consistent: Option<bool>,
    pub failure: Option<String>,
    pub rate: Option<RateFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchOutcome {
    pub name: String,
    pub count: usize,
    /// Initial branch weight: the Born-rule probability of this outcome.
    pub born_target: f64,
    pub fraction: f64,
    pub binomial_sigma: f64,
    pub within_3_sigma: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivariancePoint {
    pub time: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub wall_seconds: f64,
    pub threads: usize,
    pub shared_wave_function: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub name: String,
    pub config: ScenarioConfig,
    pub ensemble_size: usize,
    pub master_seed: u64,
    pub resolution_threshold: f64,
    pub branches: Vec<BranchOutcome>,
    pub unresolved: usize,
    pub failed: usize,
    pub partial: bool,
    pub uniqueness_violations: usize,
    pub mean_rate: Option<f64>,
    pub rate_std: Option<f64>,
    pub rate_convention: &'static str,
    pub equivariance: Vec<EquivariancePoint>,
    pub outcomes: Vec<RunOutcome>,
    pub metadata: Option<RunMetadata>,
}

impl EnsembleSummary {
    /// The summary without wall-clock data, which is the part that must be
    /// reproducible.
    pub fn without_metadata(&self) -> Self {
        Self {
            metadata: None,
            ..self.clone()
        }
    }

    pub fn branch(&self, name: &str) -> Option<&BranchOutcome> {
        self.branches.iter().find(|b| b.name == name)
    }
}

pub struct EnsembleResult {
    pub summary: EnsembleSummary,
    pub records: Option<Vec<RunRecord>>,
}

pub fn run_ensemble(scenario: &ScenarioConfig) -> Result<EnsembleSummary, EnsembleError> {
    Ok(run_ensemble_with(scenario, EnsembleOptions::default())?.summary)
}

pub fn run_ensemble_with(scenario: &ScenarioConfig, options: EnsembleOptions) -> Result<EnsembleResult, EnsembleError> {
    scenario.validate()?;
    let started = Instant::now();
    let psi0 = scenario.initial_state()?;
    let born: Vec<f64> = scenario
        .regions()
        .iter()
        .map(|r| branch_weight(&psi0, r))
        .collect::<Result<_, _>>()?;

    // Without localization the wave function does not depend on the
    // positions, so one evolution serves every realization.
    let shared = scenario.collapse.gamma_l == 0.0;
    let (outcomes, equivariance, records) = if shared {
        run_shared(scenario, psi0, options)?
    } else {
        run_independent(scenario, options)?
    };

    let mut summary = aggregate(scenario, &born, outcomes, equivariance);
    summary.metadata = Some(RunMetadata {
        wall_seconds: started.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
        shared_wave_function: shared,
    });
    Ok(EnsembleResult { summary, records })
}

/// The first `count` initial configurations an ensemble of `scenario`
/// would use, as `(seed, configuration)` pairs.
pub fn sample_positions(
    scenario: &ScenarioConfig,
    count: usize,
) -> Result<Vec<(u64, BohmianConfiguration)>, EnsembleError> {
    scenario.validate()?;
    let psi0 = scenario.initial_state()?;
    let sampler = EquilibriumSampler::new(&psi0)?;
    let master = scenario.ensemble.master_seed;
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let seed = realization_seed(master, i);
            (seed, sampler.sample(&mut ChaCha8Rng::seed_from_u64(seed)))
        })
        .collect())
}

type Runs = (Vec<RunOutcome>, Vec<EquivariancePoint>, Option<Vec<RunRecord>>);

fn run_independent(scenario: &ScenarioConfig, options: EnsembleOptions) -> Result<Runs, EnsembleError> {
    let size = scenario.ensemble.size;
    let master = scenario.ensemble.master_seed;
    let run_options = RunOptions {
        inject_sign_fault: options.inject_sign_fault,
        keep_final_state: false,
    };
    let results: Vec<Result<(RunOutcome, Option<RunRecord>), EnsembleError>> = (0..size)
        .into_par_iter()
        .map(|i| {
            let seed = realization_seed(master, i);
            let record = run_realization_with(scenario, seed, run_options, &mut |_, _, _| {})?;
            let outcome = outcome_of(scenario, i, &record);
            Ok((outcome, options.keep_records.then_some(record)))
        })
        .collect();
    let mut outcomes = Vec::with_capacity(size);
    let mut records = options.keep_records.then(Vec::new);
    for r in results {
        let (o, rec) = r?;
        outcomes.push(o);
        if let (Some(all), Some(rec)) = (records.as_mut(), rec) {
            all.push(rec);
        }
    }
    Ok((outcomes, Vec::new(), records))
}

fn run_shared(scenario: &ScenarioConfig, psi0: WaveFunction, options: EnsembleOptions) -> Result<Runs, EnsembleError> {
    let grid = scenario.grid()?;
    let size = scenario.ensemble.size;
    let master = scenario.ensemble.master_seed;
    let fixed = scenario.initial_positions()?;
    let seeds: Vec<u64> = (0..size).map(|i| realization_seed(master, i)).collect();
    let initial: Vec<BohmianConfiguration> = seeds
        .par_iter()
        .map(|&seed| match &fixed {
            Some(q) => Ok(q.clone()),
            None => sample_quantum_equilibrium(&psi0, seed),
        })
        .collect::<Result<_, _>>()?;

    let potential = scenario.potential_field(&grid);
    let prop = Propagator::new(&grid, potential.as_deref(), scenario.collapse, scenario.time.dt)?;
    let regions = scenario.regions();
    let steps = scenario.steps();
    let stride = scenario.time.record_stride;
    let freeze = scenario.bohmian.freeze;
    let a_l = scenario.collapse.a_l;

    let mut records: Option<Vec<RunRecord>> = options.keep_records.then(|| {
        seeds
            .iter()
            .map(|&seed| RunRecord {
                seed,
                branch_names: scenario.branches.iter().map(|b| b.name.clone()).collect(),
                samples: Vec::new(),
                failure: None,
                final_positions: initial[0].clone(),
                final_state: None,
            })
            .collect()
    });
    // per-run decision tracking needs the weights only, which are shared
    let mut weight_series: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut decision: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; regions.len()]; size];
    let mut equivariance = Vec::new();

    let mut record = |step: usize,
                      psi: &WaveFunction,
                      qs: &[BohmianConfiguration],
                      lambda_max: &dyn Fn(&BohmianConfiguration) -> f64|
     -> Result<(), EnsembleError> {
        let weights: Vec<f64> = regions
            .iter()
            .map(|r| branch_weight(psi, r))
            .collect::<Result<_, _>>()?;
        for (b, &w) in weights.iter().enumerate() {
            if w > scenario.ensemble.resolution_threshold {
                for (d, q) in decision.iter_mut().zip(qs) {
                    d[b].get_or_insert_with(|| q.positions().to_vec());
                }
            }
        }
        if size >= MIN_REALIZATIONS {
            let positions: Vec<Vec<f64>> = qs.iter().map(|q| q.positions().to_vec()).collect();
            equivariance.push(EquivariancePoint {
                time: psi.time(),
                distance: equivariance_distance(&positions, psi)?,
            });
        }
        if let Some(all) = records.as_mut() {
            let norm = psi.norm_squared().sqrt();
            for (rec, q) in all.iter_mut().zip(qs) {
                rec.samples.push(RunSample {
                    step,
                    time: psi.time(),
                    norm,
                    branch_weights: weights.clone(),
                    positions: q.positions().to_vec(),
                    max_lambda: lambda_max(q),
                });
            }
        }
        weight_series.push((psi.time(), weights));
        Ok(())
    };

    let lambda_of = |q: &BohmianConfiguration| {
        smoothed_density(q, &grid, a_l)
            .map(|nb| grid.particles() as f64 * nb.max())
            .unwrap_or(f64::NAN)
    };
    let zero = |_: &BohmianConfiguration| 0.0;

    let mut qs = initial.clone();
    let mut psi = psi0;
    record(0, &psi, &qs, &lambda_of)?;
    let mut v_start = velocity_field_with(&psi, prop.spectral());
    let mut failure = None;
    for step in 1..=steps {
        let next = match prop.step_wave(&psi, &qs[0]) {
            Ok((next, _)) => next,
            Err(e) => {
                failure = Some(format!("step {step}: {e}"));
                break;
            }
        };
        let v_end = velocity_field_with(&next, prop.spectral());
        if !freeze {
            qs = qs
                .par_iter()
                .map(|q| advance_with(q, &v_start, &v_end, prop.dt()))
                .collect();
        } else {
            qs = qs
                .iter()
                .map(|q| BohmianConfiguration::new(&grid, q.positions().to_vec(), q.time() + prop.dt()))
                .collect::<Result<_, _>>()?;
        }
        psi = next;
        v_start = v_end;
        if step % stride == 0 || step == steps {
            record(step, &psi, &qs, &zero)?;
        }
    }

    let final_weights = weight_series.last().map(|w| w.1.clone()).unwrap_or_default();
    let outcomes = (0..size)
        .map(|i| {
            let winner = winner_of(scenario, &final_weights, failure.is_some());
            let (decision_time, decision_positions, consistent) = match winner {
                Some(b) => {
                    let t = weight_series
                        .iter()
                        .find(|(_, w)| w[b] > scenario.ensemble.resolution_threshold)
                        .map(|(t, _)| *t);
                    let pos = decision[i][b].clone();
                    let ok = pos.as_ref().map(|p| regions[b].contains(p));
                    (t, pos, ok)
                }
                None => (None, None, None),
            };
            RunOutcome {
                index: i,
                seed: seeds[i],
                winner: winner.map(|b| scenario.branches[b].name.clone()),
                final_weights: final_weights.clone(),
                initial_positions: initial[i].positions().to_vec(),
                final_positions: qs[i].positions().to_vec(),
                decision_time,
                decision_positions,
                consistent,
                failure: failure.clone(),
                rate: None,
            }
        })
        .collect();
    if let Some(all) = records.as_mut() {
        for (rec, q) in all.iter_mut().zip(&qs) {
            rec.final_positions = q.clone();
            rec.failure = failure.clone();
        }
    }
    Ok((outcomes, equivariance, records))
}

fn winner_of(scenario: &ScenarioConfig, weights: &[f64], failed: bool) -> Option<usize> {
    if failed {
        return None;
    }
    weights.iter().position(|&w| w > scenario.ensemble.resolution_threshold)
}

fn outcome_of(scenario: &ScenarioConfig, index: usize, record: &RunRecord) -> RunOutcome {
    let regions = scenario.regions();
    let last = record.last();
    let winner = winner_of(scenario, &last.branch_weights, record.is_partial());
    let (decision_time, decision_positions, consistent) = match winner {
        Some(b) => {
            let first = record
                .samples
                .iter()
                .find(|s| s.branch_weights[b] > scenario.ensemble.resolution_threshold)
                .expect("the final sample crosses the threshold");
            (
                Some(first.time),
                Some(first.positions.clone()),
                Some(regions[b].contains(&first.positions)),
            )
        }
        None => (None, None, None),
    };
    let rate = match (winner, regions.len()) {
        (Some(b), 2) => fit_collapse_rate(record, b, 1 - b).ok(),
        _ => None,
    };
    RunOutcome {
        index,
        seed: record.seed,
        winner: winner.map(|b| scenario.branches[b].name.clone()),
        final_weights: last.branch_weights.clone(),
        initial_positions: record.samples[0].positions.clone(),
        final_positions: record.final_positions.positions().to_vec(),
        decision_time,
        decision_positions,
        consistent,
        failure: record.failure.clone(),
        rate,
    }
}

fn aggregate(
    scenario: &ScenarioConfig,
    born: &[f64],
    outcomes: Vec<RunOutcome>,
    equivariance: Vec<EquivariancePoint>,
) -> EnsembleSummary {
    let size = outcomes.len();
    let nf = size as f64;
    let branches = scenario
        .branches
        .iter()
        .zip(born)
        .map(|(b, &target)| {
            let count = outcomes
                .iter()
                .filter(|o| o.winner.as_deref() == Some(b.name.as_str()))
                .count();
            let fraction = count as f64 / nf;
            let sigma = (target * (1.0 - target) / nf).sqrt();
            BranchOutcome {
                name: b.name.clone(),
                count,
                born_target: target,
                fraction,
                binomial_sigma: sigma,
                within_3_sigma: (fraction - target).abs() <= 3.0 * sigma,
            }
        })
        .collect();
    let failed = outcomes.iter().filter(|o| o.failure.is_some()).count();
    let unresolved = outcomes
        .iter()
        .filter(|o| o.failure.is_none() && o.winner.is_none())
        .count();
    let uniqueness_violations = outcomes.iter().filter(|o| o.consistent == Some(false)).count();
    let rates: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.rate.as_ref().map(|r| r.rate))
        .collect();
    let (mean_rate, rate_std) = if rates.is_empty() {
        (None, None)
    } else {
        let k = rates.len() as f64;
        let mean = rates.iter().sum::<f64>() / k;
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / k;
        (Some(mean), Some(var.sqrt()))
    };
    EnsembleSummary {
        name: scenario.name.clone(),
        config: scenario.clone(),
        ensemble_size: size,
        master_seed: scenario.ensemble.master_seed,
        resolution_threshold: scenario.ensemble.resolution_threshold,
        branches,
        unresolved,
        failed,
        partial: failed > 0,
        uniqueness_violations,
        mean_rate,
        rate_std,
        rate_convention: RATE_CONVENTION,
        equivariance,
        outcomes,
        metadata: None,
    }
}
