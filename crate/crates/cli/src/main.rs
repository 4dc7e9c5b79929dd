use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qcollapse::collapse::{run_realization_with, RunOptions};
use qcollapse::config::{parse_assignment, parse_scenario, ConfigError, ScenarioConfig};
use qcollapse::ensemble::{fit_collapse_rate, run_ensemble_with, sample_positions, EnsembleOptions};
use qcollapse::output::{
    write_json, write_outcomes_csv, write_record_csv, write_samples_csv, write_trajectories_long_csv,
    write_trajectory_csv,
};
use qcollapse::rate_table::{format_csv, format_plain, rates_table};
use qcollapse::snapshot::save_snapshot;
use qcollapse::validation::{validate_suite, Level};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(
    name = "qcollapse",
    version,
    about = "Schrödinger evolution with a Bohmian localization term: single runs, ensembles, rate tables."
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Flip the sign of gamma_L inside the propagator (fault-injection harness).
    #[arg(long, hide = true, global = true)]
    inject_fault: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one realization and write its time series.
    Run(RunArgs),
    /// Run an ensemble of realizations and write outcome statistics.
    Ensemble(EnsembleArgs),
    /// Tabulate SI collapse-rate estimates from a parameter file.
    Rates(RatesArgs),
    /// Run the built-in invariant checks.
    Validate(ValidateArgs),
    /// Draw initial configurations from |Psi(0)|^2 only.
    Sample(SampleArgs),
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. --set collapse.gamma_L=0.25.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Parent directory for the per-invocation output directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Sampling seed when the scenario has no fixed positions.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TrajectoryFormat {
    /// No trajectory files.
    None,
    /// One trajectory_<i>.csv per realization.
    PerRun,
    /// A single trajectories.csv with a realization column.
    Long,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value = "none")]
    trajectories: TrajectoryFormat,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TableFormat {
    Plain,
    Csv,
}

#[derive(Args, Debug)]
struct RatesArgs {
    /// Parameter file with [[rows]] of label, formula and inputs.
    #[arg(long)]
    params: PathBuf,
    #[arg(long, value_enum, default_value = "plain")]
    format: TableFormat,
    /// Also write rates.csv under a per-invocation directory here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long, default_value = "quick")]
    level: Level,
    /// Also write report.json under a per-invocation directory here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    count: usize,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Physics(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Physics(e)
    }
}

fn config_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let fault = cli.inject_fault;
    if fault {
        log::warn!("fault injection active: gamma_L sign flipped");
    }
    let result = match cli.command {
        Command::Run(args) => cmd_run(args, fault),
        Command::Ensemble(args) => cmd_ensemble(args, fault),
        Command::Rates(args) => cmd_rates(args),
        Command::Validate(args) => cmd_validate(args, fault),
        Command::Sample(args) => cmd_sample(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Physics(e)) => {
            eprintln!("run failed: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load(args: &ScenarioArgs) -> Result<ScenarioConfig, Failure> {
    let overrides = args
        .overrides
        .iter()
        .map(|s| parse_assignment(s))
        .collect::<Result<Vec<_>, ConfigError>>()
        .map_err(config_error)?;
    parse_scenario(&args.config, &overrides).map_err(config_error)
}

/// Creates `<parent>/<timestamp>-<label>`, adding a suffix if it exists.
fn invocation_dir(parent: &Path, label: &str) -> anyhow::Result<PathBuf> {
    let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S%.3f");
    let base = parent.join(format!("{stamp}-{label}"));
    let mut dir = base.clone();
    let mut n = 1;
    while dir.exists() {
        dir = PathBuf::from(format!("{}-{n}", base.display()));
        n += 1;
    }
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Output directory with the input file and the resolved config echoed.
fn prepare_outputs(args: &ScenarioArgs, scenario: &ScenarioConfig, label: &str) -> anyhow::Result<PathBuf> {
    let dir = invocation_dir(&args.out, &format!("{label}-{}", scenario.name))?;
    fs::copy(&args.config, dir.join("input.toml")).context("copying the config")?;
    fs::write(dir.join("config.toml"), scenario.to_toml()).context("writing the resolved config")?;
    Ok(dir)
}

fn cmd_run(args: RunArgs, fault: bool) -> Result<(), Failure> {
    let scenario = load(&args.scenario)?;
    let dir = prepare_outputs(&args.scenario, &scenario, "run")?;
    let seed = args.seed.unwrap_or(scenario.ensemble.master_seed);

    let stride = scenario.output.snapshot_stride;
    let snap_dir = dir.join("snapshots");
    if stride > 0 {
        fs::create_dir_all(&snap_dir).context("creating the snapshot directory")?;
    }
    let mut snapshot_error = None;
    let options = RunOptions {
        inject_sign_fault: fault,
        keep_final_state: false,
    };
    let record = run_realization_with(&scenario, seed, options, &mut |step, psi, _| {
        if stride > 0 && step % stride == 0 && snapshot_error.is_none() {
            let path = snap_dir.join(format!("psi_{step:07}.bin"));
            if let Err(e) = save_snapshot(psi, &path) {
                snapshot_error = Some(e);
            }
        }
    })
    .map_err(|e| Failure::Physics(e.into()))?;
    if let Some(e) = snapshot_error {
        return Err(anyhow!(e).context("writing snapshots").into());
    }

    write_record_csv(&record, create(&dir.join("record.csv"))?).context("writing record.csv")?;
    write_trajectory_csv(&record, create(&dir.join("trajectory.csv"))?).context("writing trajectory.csv")?;
    let rate = (record.branch_names.len() == 2)
        .then(|| fit_collapse_rate(&record, 0, 1))
        .transpose();
    let rate = match rate {
        Ok(r) => r,
        Err(e) => {
            log::warn!("no rate fit: {e}");
            None
        }
    };
    let last = record.last();
    let summary = json!({
        "name": scenario.name,
        "seed": seed,
        "steps": scenario.steps(),
        "final_time": last.time,
        "final_norm": last.norm,
        "branches": record.branch_names,
        "final_weights": last.branch_weights,
        "initial_positions": record.samples[0].positions,
        "final_positions": record.final_positions.positions(),
        "rate_fit_first_vs_second_branch": rate,
        "failure": record.failure,
        "config": scenario,
    });
    write_json(&summary, create(&dir.join("summary.json"))?).context("writing summary.json")?;

    println!("output: {}", dir.display());
    for (name, w) in record.branch_names.iter().zip(&last.branch_weights) {
        println!("weight {name}: {w:.6e}");
    }
    if let Some(r) = &rate {
        println!(
            "rate fit: {:.6} (95% CI {:.6} .. {:.6}, {} points)",
            r.rate, r.ci95.0, r.ci95.1, r.points
        );
    }
    match record.failure {
        Some(f) => Err(Failure::Physics(anyhow!("{f}; partial output kept"))),
        None => Ok(()),
    }
}

fn cmd_ensemble(args: EnsembleArgs, fault: bool) -> Result<(), Failure> {
    let scenario = load(&args.scenario)?;
    let dir = prepare_outputs(&args.scenario, &scenario, "ensemble")?;
    let options = EnsembleOptions {
        inject_sign_fault: fault,
        keep_records: args.trajectories != TrajectoryFormat::None,
    };
    let result = run_ensemble_with(&scenario, options).map_err(|e| Failure::Physics(e.into()))?;
    let summary = result.summary;
    write_json(&summary, create(&dir.join("summary.json"))?).context("writing summary.json")?;
    write_outcomes_csv(&summary, create(&dir.join("outcomes.csv"))?).context("writing outcomes.csv")?;
    if let Some(records) = &result.records {
        match args.trajectories {
            TrajectoryFormat::Long => {
                write_trajectories_long_csv(records, create(&dir.join("trajectories.csv"))?)
                    .context("writing trajectories.csv")?;
            }
            TrajectoryFormat::PerRun => {
                for (i, rec) in records.iter().enumerate() {
                    let path = dir.join(format!("trajectory_{i}.csv"));
                    write_trajectory_csv(rec, create(&path)?).context("writing trajectories")?;
                }
            }
            TrajectoryFormat::None => {}
        }
    }

    println!("output: {}", dir.display());
    for b in &summary.branches {
        println!(
            "{}: {}/{} = {:.4} (Born {:.4} ± {:.4} at 3σ) {}",
            b.name,
            b.count,
            summary.ensemble_size,
            b.fraction,
            b.born_target,
            3.0 * b.binomial_sigma,
            if b.within_3_sigma { "ok" } else { "outside" }
        );
    }
    println!(
        "unresolved {}, failed {}, uniqueness violations {}",
        summary.unresolved, summary.failed, summary.uniqueness_violations
    );
    if let (Some(m), Some(s)) = (summary.mean_rate, summary.rate_std) {
        println!("mean fitted rate {m:.6} (spread {s:.2e})");
    }
    if let Some(p) = summary.equivariance.last() {
        println!("equivariance L1 at t = {}: {:.4}", p.time, p.distance);
    }
    if summary.partial {
        return Err(Failure::Physics(anyhow!(
            "{} of {} realizations failed; summary marked partial",
            summary.failed,
            summary.ensemble_size
        )));
    }
    Ok(())
}

fn cmd_rates(args: RatesArgs) -> Result<(), Failure> {
    // every table error is a problem with the parameter file
    let entries = rates_table(&args.params).map_err(config_error)?;
    let csv = format_csv(&entries);
    match args.format {
        TableFormat::Plain => print!("{}", format_plain(&entries)),
        TableFormat::Csv => print!("{csv}"),
    }
    if let Some(parent) = &args.out {
        let dir = invocation_dir(parent, "rates")?;
        fs::copy(&args.params, dir.join("params.toml")).context("copying the parameter file")?;
        fs::write(dir.join("rates.csv"), csv).context("writing rates.csv")?;
        eprintln!("output: {}", dir.display());
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs, fault: bool) -> Result<(), Failure> {
    let report = validate_suite(args.level, fault);
    for c in &report.checks {
        println!("{c}");
    }
    if let Some(parent) = &args.out {
        let dir = invocation_dir(parent, "validate")?;
        write_json(&report, create(&dir.join("report.json"))?).context("writing report.json")?;
        eprintln!("output: {}", dir.display());
    }
    let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        println!("all {} checks passed", report.checks.len());
        Ok(())
    } else {
        Err(Failure::Physics(anyhow!("failed checks: {}", failed.join(", "))))
    }
}

fn cmd_sample(args: SampleArgs) -> Result<(), Failure> {
    let scenario = load(&args.scenario)?;
    if args.count == 0 {
        return Err(config_error(anyhow!("--count must be at least 1")));
    }
    let dir = prepare_outputs(&args.scenario, &scenario, "sample")?;
    let samples = sample_positions(&scenario, args.count).map_err(|e| Failure::Physics(e.into()))?;
    write_samples_csv(&samples, create(&dir.join("samples.csv"))?).context("writing samples.csv")?;
    println!("output: {}", dir.display());
    println!("{} configurations from |Psi(0)|^2", samples.len());
    Ok(())
}
