//! Collapse-rate fit from the branch-weight time series of one run.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EnsembleError;
use crate::collapse::RunRecord;

/// Weights outside `[FIT_FLOOR, 1 - FIT_FLOOR]` are excluded from the fit.
pub const FIT_FLOOR: f64 = 1e-9;
pub const MIN_FIT_POINTS: usize = 5;

pub const RATE_CONVENTION: &str =
    "rate = slope/2 of ln(w_full/w_empty) vs t; compare with gamma_L * (Lambda_full - Lambda_empty)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub rate: f64,
    pub std_error: f64,
    /// 95% confidence interval from the Student t distribution.
    pub ci95: (f64, f64),
    pub points: usize,
    pub window: (f64, f64),
    pub convention: &'static str,
}

/// Least-squares slope of `ln(w_full/w_empty)` over the samples where both
/// weights lie in `[1e-9, 1 - 1e-9]`, halved to give an amplitude rate.
pub fn fit_collapse_rate(
    record: &RunRecord,
    full_branch: usize,
    empty_branch: usize,
) -> Result<RateFit, EnsembleError> {
    let n_branches = record.branch_names.len();
    if full_branch >= n_branches || empty_branch >= n_branches || full_branch == empty_branch {
        return Err(EnsembleError::Branch(format!(
            "branches {full_branch} and {empty_branch} must be distinct indices below {n_branches}"
        )));
    }
    let ok = |w: f64| (FIT_FLOOR..=1.0 - FIT_FLOOR).contains(&w);
    let points: Vec<(f64, f64)> = record
        .samples
        .iter()
        .filter(|s| ok(s.branch_weights[full_branch]) && ok(s.branch_weights[empty_branch]))
        .map(|s| {
            (
                s.time,
                (s.branch_weights[full_branch] / s.branch_weights[empty_branch]).ln(),
            )
        })
        .collect();
    fit_log_ratio(&points)
}

/// Fit of `(t, ln ratio)` pairs; the returned rate is half the slope.
pub fn fit_log_ratio(points: &[(f64, f64)]) -> Result<RateFit, EnsembleError> {
    let n = points.len();
    if n < MIN_FIT_POINTS {
        return Err(EnsembleError::ShortWindow(n));
    }
    let nf = n as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(EnsembleError::ShortWindow(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let ssr: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_se = (ssr / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .expect("at least three degrees of freedom")
        .inverse_cdf(0.975);
    let rate = 0.5 * slope;
    let std_error = 0.5 * slope_se;
    Ok(RateFit {
        rate,
        std_error,
        ci95: (rate - t * std_error, rate + t * std_error),
        points: n,
        window: (points[0].0, points[n - 1].0),
        convention: RATE_CONVENTION,
    })
}
