//! One realization: sample positions, then loop the coupled step over `[0, T]`.

use serde::Serialize;

use super::{CollapseError, Propagator};
use crate::bohmian::{sample_quantum_equilibrium, smoothed_density, BohmianConfiguration};
use crate::config::ScenarioConfig;
use crate::wavefunction::{branch_weight, Region, WaveFunction};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSample {
    pub step: usize,
    pub time: f64,
    /// `‖Φ‖`
    pub norm: f64,
    pub branch_weights: Vec<f64>,
    pub positions: Vec<f64>,
    pub max_lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub branch_names: Vec<String>,
    pub samples: Vec<RunSample>,
    /// Error that ended the run early; the samples up to it are kept.
    pub failure: Option<String>,
    pub final_positions: BohmianConfiguration,
    #[serde(skip)]
    pub final_state: Option<WaveFunction>,
}

impl RunRecord {
    pub fn is_partial(&self) -> bool {
        self.failure.is_some()
    }

    pub fn last(&self) -> &RunSample {
        self.samples.last().expect("a record holds at least the initial sample")
    }

    /// `(time, weight)` series of one branch.
    pub fn branch_series(&self, branch: usize) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .map(|s| (s.time, s.branch_weights[branch]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub inject_sign_fault: bool,
    pub keep_final_state: bool,
}

/// Runs the scenario with positions sampled from `|Ψ(0)|²` using `seed`
/// (or the fixed positions of the scenario, when given).
pub fn run_realization(scenario: &ScenarioConfig, seed: u64) -> Result<RunRecord, CollapseError> {
    let options = RunOptions {
        keep_final_state: true,
        ..RunOptions::default()
    };
    run_realization_with(scenario, seed, options, &mut |_, _, _| {})
}

/// Like [`run_realization`], calling `observer(step, psi, q)` after setup and
/// after every step.
pub fn run_realization_with(
    scenario: &ScenarioConfig,
    seed: u64,
    options: RunOptions,
    observer: &mut dyn FnMut(usize, &WaveFunction, &BohmianConfiguration),
) -> Result<RunRecord, CollapseError> {
    let psi0 = scenario.initial_state()?;
    let q0 = match scenario.initial_positions()? {
        Some(q) => q,
        None => sample_quantum_equilibrium(&psi0, seed)?,
    };
    run_realization_from(scenario, psi0, q0, seed, options, observer)
}

/// Runs from an explicit initial state and configuration.
pub fn run_realization_from(
    scenario: &ScenarioConfig,
    psi0: WaveFunction,
    q0: BohmianConfiguration,
    seed: u64,
    options: RunOptions,
    observer: &mut dyn FnMut(usize, &WaveFunction, &BohmianConfiguration),
) -> Result<RunRecord, CollapseError> {
    let grid = scenario.grid()?;
    let potential = scenario.potential_field(&grid);
    let mut prop = Propagator::new(&grid, potential.as_deref(), scenario.collapse, scenario.time.dt)?;
    if options.inject_sign_fault {
        prop.inject_sign_fault();
    }
    let regions = scenario.regions();
    let steps = scenario.steps();
    let stride = scenario.time.record_stride;
    let freeze = scenario.bohmian.freeze;

    let initial_lambda = grid.particles() as f64 * smoothed_density(&q0, &grid, scenario.collapse.a_l)?.max();
    let mut samples = vec![sample(0, &psi0, &q0, &regions, initial_lambda)?];
    observer(0, &psi0, &q0);

    let mut psi = psi0;
    let mut q = q0;
    let mut failure = None;
    for step in 1..=steps {
        let result = if freeze {
            prop.step_frozen(&psi, &q)
        } else {
            prop.step(&psi, &q)
        };
        match result {
            Ok((next_psi, next_q, lambda_max)) => {
                psi = next_psi;
                q = next_q;
                observer(step, &psi, &q);
                if step % stride == 0 || step == steps {
                    samples.push(sample(step, &psi, &q, &regions, lambda_max)?);
                }
            }
            Err(e) => {
                log::error!("realization with seed {seed} failed at step {step}: {e}");
                failure = Some(format!("step {step}: {e}"));
                break;
            }
        }
    }

    Ok(RunRecord {
        seed,
        branch_names: scenario.branches.iter().map(|b| b.name.clone()).collect(),
        samples,
        failure,
        final_positions: q,
        final_state: options.keep_final_state.then_some(psi),
    })
}

fn sample(
    step: usize,
    psi: &WaveFunction,
    q: &BohmianConfiguration,
    regions: &[Region],
    max_lambda: f64,
) -> Result<RunSample, CollapseError> {
    let branch_weights = regions
        .iter()
        .map(|r| branch_weight(psi, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunSample {
        step,
        time: psi.time(),
        norm: psi.norm_squared().sqrt(),
        branch_weights,
        positions: q.positions().to_vec(),
        max_lambda,
    })
}
