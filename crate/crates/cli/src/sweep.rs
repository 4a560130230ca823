use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;
use viscowave::analysis::{check_theorem_bound, classify, fit_decay_rate, Classification, SweepRow, DEFAULT_GROWTH_THRESHOLD};
use viscowave::solver::{RunOptions, Solver};

use crate::certify::certificate_for;
use crate::config::RunConfig;
use crate::output::{num, write_csv, write_json};
use crate::simulate::CHECK_TOL;

pub const SWEEP_HEADER: [&str; 6] = ["k", "sigma_emp", "r_squared", "classification", "certified", "theorem_bound_ok"];

fn failed(k: f64, theta: f64, e: impl std::fmt::Display) -> SweepRow {
    SweepRow {
        k,
        theta,
        sigma_emp: f64::NAN,
        r_squared: f64::NAN,
        classification: Classification::Inconclusive,
        certified: false,
        theorem_bound_ok: false,
        error: Some(e.to_string()),
    }
}

fn sweep_row(config: &RunConfig, k: f64, theta: f64, seed: u64) -> SweepRow {
    let row = RunConfig { k, theta: Some(theta), ..config.clone() };
    let v = match row.validate(seed) {
        Ok(v) => v,
        Err(e) => return failed(k, theta, format!("{e:#}")),
    };
    let horizon = match row.horizon() {
        Ok(t) => t,
        Err(e) => return failed(k, theta, e),
    };
    let cert = certificate_for(&v).ok();
    let mut solver = Solver::new(v.params.clone(), v.disc.clone());
    let state = solver.build(&row.init);
    let trace = match solver.run(state, &RunOptions::new(horizon, row.sample_every)) {
        Ok((trace, _)) => trace,
        Err(e) => return failed(k, theta, e),
    };
    let (sigma_emp, r_squared, classification, fit_error) = match fit_decay_rate(&trace, None) {
        Ok(f) => (f.sigma_emp, f.r_squared, classify(&f, DEFAULT_GROWTH_THRESHOLD), None),
        Err(e) => (f64::NAN, f64::NAN, Classification::Inconclusive, Some(e.to_string())),
    };
    let certified = cert.as_ref().is_some_and(|c| c.certified());
    let theorem_bound_ok = cert
        .as_ref()
        .and_then(|c| c.sigma())
        .is_some_and(|sigma| check_theorem_bound(&trace, sigma, CHECK_TOL).ok);
    SweepRow {
        k,
        theta,
        sigma_emp,
        r_squared,
        classification,
        certified,
        theorem_bound_ok,
        error: fit_error,
    }
}

/// All `(θ, k)` rows, ordered by `θ` group and then by `k`.
pub fn sweep_rows(config: &RunConfig, seed: u64) -> Result<Vec<SweepRow>> {
    let ks = config.sweep_gains()?;
    let base = config.validate(seed)?;
    let thetas = match &config.theta_values {
        Some(t) if t.is_empty() => anyhow::bail!("theta_values: empty"),
        Some(t) => t.clone(),
        None => vec![base.params.theta],
    };
    config.horizon()?;
    let jobs: Vec<(f64, f64)> = thetas.iter().flat_map(|&th| ks.iter().map(move |&k| (th, k))).collect();
    Ok(jobs.par_iter().map(|&(theta, k)| sweep_row(config, k, theta, seed)).collect())
}

fn csv_row(r: &SweepRow) -> Vec<String> {
    let classification = if r.error.is_some() && r.sigma_emp.is_nan() {
        "error".to_string()
    } else {
        r.classification.as_str().to_string()
    };
    vec![
        num(r.k),
        num(r.sigma_emp),
        num(r.r_squared),
        classification,
        r.certified.to_string(),
        r.theorem_bound_ok.to_string(),
    ]
}

/// Writes `sweep.csv` (one file per θ as `sweep_theta_<θ>.csv` when
/// `theta_values` is given) and `sweep.json` with every row including errors.
pub fn cmd_sweep(config: &RunConfig, out: &Path, seed: u64) -> Result<Vec<SweepRow>> {
    let rows = sweep_rows(config, seed)?;
    let line = config.validate(seed)?.resolved.to_json_line();
    match &config.theta_values {
        None => {
            let body: Vec<Vec<String>> = rows.iter().map(csv_row).collect();
            write_csv(out, "sweep.csv", &line, &SWEEP_HEADER, &body)?;
        }
        Some(thetas) => {
            for &theta in thetas {
                let body: Vec<Vec<String>> = rows.iter().filter(|r| r.theta == theta).map(csv_row).collect();
                write_csv(out, &format!("sweep_theta_{theta}.csv"), &line, &SWEEP_HEADER, &body)?;
            }
        }
    }
    write_json(out, "sweep.json", &serde_json::json!({ "config": config.validate(seed)?.resolved, "rows": rows }))?;
    Ok(rows)
}
