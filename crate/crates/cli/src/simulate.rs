use std::path::Path;

use anyhow::{anyhow, Result};
use serde_json::{json, Value};
use viscowave::analysis::{
    check_integral_inequality, check_memory_identity, check_theorem_bound, classify, fit_decay_rate, Classification,
    DEFAULT_GROWTH_THRESHOLD,
};
use viscowave::energy::check_dissipation;
use viscowave::solver::{Mode, RunOptions, Solver, Trace};

use crate::certify::{certificate_for, Certificate};
use crate::config::{RunConfig, Validated};
use crate::output::{num, write_csv, write_json, write_text};
use crate::plot::{log_plot, Series};

/// Relative slack allowed on the certified envelope and the integral bound.
pub const CHECK_TOL: f64 = 0.01;

pub const ENERGY_HEADER: [&str; 6] = ["t", "total", "kinetic", "elastic", "memory", "delay"];

pub fn energy_rows(trace: &Trace) -> Vec<Vec<String>> {
    trace
        .samples
        .iter()
        .map(|s| {
            let e = s.energy;
            vec![num(s.t), num(e.total), num(e.kinetic), num(e.elastic), num(e.memory), num(e.delay)]
        })
        .collect()
}

fn err_json(e: impl std::fmt::Display) -> Value {
    json!({ "error": e.to_string() })
}

fn analyse(trace: &Trace, v: &Validated, cert: &Option<Certificate>, config: &RunConfig) -> Value {
    let fit = fit_decay_rate(trace, None);
    let classification = fit
        .as_ref()
        .map_or(Classification::Inconclusive, |f| classify(f, DEFAULT_GROWTH_THRESHOLD));
    let mut report = json!({
        "config": v.resolved,
        "samples": trace.samples.len(),
        "fit": fit.as_ref().map_or_else(err_json, |f| json!(f)),
        "classification": classification.as_str(),
    });
    match cert {
        Some(c) => {
            report["certified"] = json!(c.certified());
            if let Some(sigma) = c.sigma() {
                report["sigma_certified"] = json!(sigma);
                if v.params.mode == Mode::Original {
                    report["theorem_bound"] = json!(check_theorem_bound(trace, sigma, CHECK_TOL));
                }
            }
        }
        None => report["certified"] = json!(false),
    }
    if v.params.mode == Mode::Auxiliary {
        report["dissipation"] = check_dissipation(trace, &v.params).map_or_else(err_json, |d| json!(d));
        if let Some(Certificate::Delayed(r)) = cert {
            if r.k_below_k_bar {
                report["integral_inequality"] = check_integral_inequality(trace, r.c_big, CHECK_TOL)
                    .map_or_else(err_json, |c| json!({ "c_big": r.c_big, "ok": c.ok, "worst_ratio": c.worst_ratio }));
            }
        }
        if config.snapshots {
            let (s, t) = config.snapshot_window(trace.samples.last().map_or(0.0, |x| x.t));
            report["memory_identity"] =
                check_memory_identity(trace, &v.disc, s, t).map_or_else(err_json, |m| json!(m));
        }
    }
    report
}

fn envelope(trace: &Trace, sigma: f64) -> Vec<f64> {
    let f0 = trace.samples.first().map_or(0.0, |s| s.energy.total);
    trace.samples.iter().map(|s| f0 * (1.0 - sigma * s.t).exp()).collect()
}

/// Runs one simulation and writes `energy.csv`, `report.json` and `energy.svg`.
pub fn cmd_simulate(config: &RunConfig, out: &Path, seed: u64) -> Result<()> {
    let v = config.validate(seed)?;
    let horizon = config.horizon()?;
    // Not every configuration admits a certificate (θ ≤ 1 with a delay).
    let cert = certificate_for(&v).ok();
    let mut options = RunOptions::new(horizon, config.sample_every);
    if config.snapshots {
        options = options.with_snapshots(config.snapshot_every, config.snapshot_window(horizon));
    }
    let mut solver = Solver::new(v.params.clone(), v.disc.clone());
    let state = solver.build(&config.init);
    let config_line = v.resolved.to_json_line();
    let (trace, failure) = match solver.run(state, &options) {
        Ok((trace, _)) => (trace, None),
        Err(e) => (*e.partial, Some(e.error)),
    };
    write_csv(out, "energy.csv", &config_line, &ENERGY_HEADER, &energy_rows(&trace))?;
    let mut report = analyse(&trace, &v, &cert, config);
    if let Some(e) = &failure {
        report["error"] = json!(e.to_string());
    }
    write_json(out, "report.json", &report)?;

    let times = trace.times();
    let totals = trace.totals();
    let env = cert.as_ref().and_then(Certificate::sigma).map(|s| envelope(&trace, s));
    let mut series = vec![Series { label: "F(t)", color: "#1f77b4", dashed: false, values: &totals }];
    if let Some(env) = &env {
        series.push(Series { label: "F(0) e^(1 - sigma t)", color: "#d62728", dashed: true, values: env });
    }
    let title = format!("energy, k = {}, mode = {:?}", v.params.k, v.params.mode).to_lowercase();
    write_text(out, "energy.svg", &log_plot(&title, &times, &series))?;
    match failure {
        Some(e) => Err(anyhow!(e)),
        None => Ok(()),
    }
}
