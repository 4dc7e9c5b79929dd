//! CSV time series and JSON summaries.
//!
//! Files written by the CLI:
//!
//! - `record.csv`: `step, time, norm, w_<branch>..., q_1..q_N, max_lambda`
//! - `trajectories.csv`: `realization, seed, time, q_1..q_N` (long format),
//!   or `trajectory_<i>.csv` with `time, q_1..q_N` per realization
//! - `outcomes.csv`: one row per realization of an ensemble
//! - `summary.json`: the full summary, config included
//! - `snapshots/psi_<step>.bin`: see [`crate::snapshot`]

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::bohmian::BohmianConfiguration;
use crate::collapse::RunRecord;
use crate::ensemble::EnsembleSummary;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn position_headers(n: usize) -> impl Iterator<Item = String> {
    (1..=n).map(|i| format!("q_{i}"))
}

fn particles(record: &RunRecord) -> usize {
    record.final_positions.particles()
}

pub fn write_record_csv<W: Write>(record: &RunRecord, out: W) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string(), "time".into(), "norm".into()];
    header.extend(record.branch_names.iter().map(|b| format!("w_{b}")));
    header.extend(position_headers(particles(record)));
    header.push("max_lambda".into());
    w.write_record(&header)?;
    for s in &record.samples {
        let mut row = vec![s.step.to_string(), s.time.to_string(), s.norm.to_string()];
        row.extend(s.branch_weights.iter().map(f64::to_string));
        row.extend(s.positions.iter().map(f64::to_string));
        row.push(s.max_lambda.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `time, q_1..q_N` for one realization.
pub fn write_trajectory_csv<W: Write>(record: &RunRecord, out: W) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string()];
    header.extend(position_headers(particles(record)));
    w.write_record(&header)?;
    for s in &record.samples {
        let mut row = vec![s.time.to_string()];
        row.extend(s.positions.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `realization, seed, time, q_1..q_N` for many realizations in one file.
pub fn write_trajectories_long_csv<W: Write>(records: &[RunRecord], out: W) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    let n = records.first().map(particles).unwrap_or(0);
    let mut header = vec!["realization".to_string(), "seed".into(), "time".into()];
    header.extend(position_headers(n));
    w.write_record(&header)?;
    for (i, rec) in records.iter().enumerate() {
        for s in &rec.samples {
            let mut row = vec![i.to_string(), rec.seed.to_string(), s.time.to_string()];
            row.extend(s.positions.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_outcomes_csv<W: Write>(summary: &EnsembleSummary, out: W) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    let n = summary.config.grid.particles;
    let mut header: Vec<String> = [
        "realization",
        "seed",
        "winner",
        "decision_time",
        "consistent",
        "rate",
        "failure",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=n).map(|i| format!("q0_{i}")));
    header.extend((1..=n).map(|i| format!("qT_{i}")));
    w.write_record(&header)?;
    let opt = |x: Option<String>| x.unwrap_or_default();
    for o in &summary.outcomes {
        let mut row = vec![
            o.index.to_string(),
            o.seed.to_string(),
            opt(o.winner.clone()),
            opt(o.decision_time.map(|t| t.to_string())),
            opt(o.consistent.map(|c| c.to_string())),
            opt(o.rate.as_ref().map(|r| r.rate.to_string())),
            opt(o.failure.clone()),
        ];
        row.extend(o.initial_positions.iter().map(f64::to_string));
        row.extend(o.final_positions.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `sample, seed, q_1..q_N`
pub fn write_samples_csv<W: Write>(samples: &[(u64, BohmianConfiguration)], out: W) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    let n = samples.first().map(|s| s.1.particles()).unwrap_or(0);
    let mut header = vec!["sample".to_string(), "seed".into()];
    header.extend(position_headers(n));
    w.write_record(&header)?;
    for (i, (seed, q)) in samples.iter().enumerate() {
        let mut row = vec![i.to_string(), seed.to_string()];
        row.extend(q.positions().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(value: &T, mut out: W) -> Result<(), OutputError> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}
