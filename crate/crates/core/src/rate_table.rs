//! Tables of SI collapse-rate estimates from a parameter file.
//!
//! ```toml
//! [[rows]]
//! label = "pointer"
//! formula = "macroscopic"
//! inputs = { gamma_L = "1e-16", N_B = "1e11", N_P = "1e20" }
//! ```
//!
//! Inputs per formula:
//!
//! - `macroscopic`: `gamma_L`, `N_B`, `N_P`
//! - `interference`: `gamma_L`, `N`
//! - `microscopic`: `gamma_L`, then either `a0_over_a_L` or both `a0` and
//!   `a_L`, and an optional `N` (left symbolic when absent)
//!
//! Values are decimal strings or numbers and are kept exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collapse::rates::{rate_interference, rate_macroscopic, rate_microscopic, Rate, RateError, SiValue};

#[derive(Debug, Error)]
pub enum RateTableError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("row {label:?} ({formula}): {message}")]
    Inputs {
        label: String,
        formula: Formula,
        message: String,
    },
    #[error("row {label:?}: {source}")]
    Rate { label: String, source: RateError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    Microscopic,
    Interference,
    Macroscopic,
}

impl std::fmt::Display for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Formula::Microscopic => "microscopic",
            Formula::Interference => "interference",
            Formula::Macroscopic => "macroscopic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateRow {
    pub label: String,
    pub formula: Formula,
    pub inputs: BTreeMap<String, SiValue>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateParams {
    rows: Vec<RateRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEntry {
    pub label: String,
    pub formula: Formula,
    pub rate: Rate,
}

pub fn parse_rate_params(text: &str) -> Result<Vec<RateRow>, RateTableError> {
    let params: RateParams = toml::from_str(text).map_err(|e| RateTableError::Parse(e.to_string()))?;
    Ok(params.rows)
}

/// Reads a parameter file and evaluates every row.
pub fn rates_table(path: impl AsRef<Path>) -> Result<Vec<RateEntry>, RateTableError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| RateTableError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_rate_params(&text)?.iter().map(evaluate_row).collect()
}

pub fn evaluate_row(row: &RateRow) -> Result<RateEntry, RateTableError> {
    let mismatch = |message: String| RateTableError::Inputs {
        label: row.label.clone(),
        formula: row.formula,
        message,
    };
    let allowed: &[&str] = match row.formula {
        Formula::Macroscopic => &["gamma_L", "N_B", "N_P"],
        Formula::Interference => &["gamma_L", "N"],
        Formula::Microscopic => &["gamma_L", "a0_over_a_L", "a0", "a_L", "N"],
    };
    if let Some(extra) = row.inputs.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(mismatch(format!(
            "unexpected input {extra:?}; expected {}",
            allowed.join(", ")
        )));
    }
    let get = |key: &str| {
        row.inputs
            .get(key)
            .ok_or_else(|| mismatch(format!("missing input {key:?}")))
    };
    let rate_err = |source| RateTableError::Rate {
        label: row.label.clone(),
        source,
    };
    let rate = match row.formula {
        Formula::Macroscopic => rate_macroscopic(get("gamma_L")?, get("N_B")?, get("N_P")?),
        Formula::Interference => rate_interference(get("gamma_L")?, get("N")?),
        Formula::Microscopic => {
            let ratio = row.inputs.get("a0_over_a_L");
            let (a0, a_l) = (row.inputs.get("a0"), row.inputs.get("a_L"));
            let one = SiValue::from_integer(1);
            let (a0, a_l) = match (ratio, a0, a_l) {
                (Some(r), None, None) => (r.clone(), one),
                (None, Some(a0), Some(a_l)) => (a0.clone(), a_l.clone()),
                _ => return Err(mismatch("give either a0_over_a_L or both a0 and a_L".to_string())),
            };
            rate_microscopic(get("gamma_L")?, &a0, &a_l, row.inputs.get("N"))
        }
    }
    .map_err(rate_err)?;
    Ok(RateEntry {
        label: row.label.clone(),
        formula: row.formula,
        rate,
    })
}

pub fn format_csv(entries: &[RateEntry]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "formula", "rate_per_s", "rate_f64"])
        .expect("writing to memory");
    for e in entries {
        w.write_record([
            e.label.clone(),
            e.formula.to_string(),
            e.rate.to_string(),
            format!("{:e}", e.rate.coefficient.to_f64()),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is utf-8")
}

pub fn format_plain(entries: &[RateEntry]) -> String {
    let label_w = entries.iter().map(|e| e.label.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:<label_w$}  {:<12}  rate [1/s]", "label", "formula");
    for e in entries {
        let _ = writeln!(out, "{:<label_w$}  {:<12}  {}", e.label, e.formula.to_string(), e.rate);
    }
    out
}
