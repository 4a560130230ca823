use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use serde_json::{json, Map, Value};
use viscowave::certificate::{compute_constants, nodelay_threshold, CertificateInputs, ConstantsReport};

use crate::config::{RunConfig, Validated};
use crate::output::{write_json, write_text};

/// Either the full constants pipeline or, for `τ = 0` with `θ ≤ 1`, the
/// delay-free threshold.
#[derive(Debug, Clone)]
pub enum Certificate {
    Delayed(ConstantsReport),
    NoDelay { k: f64, threshold: f64, c1: f64, c2: f64 },
}

impl Certificate {
    pub fn certified(&self) -> bool {
        match self {
            Certificate::Delayed(r) => r.certified,
            Certificate::NoDelay { k, threshold, .. } => k.abs() < *threshold,
        }
    }

    /// Certified decay rate, when the certificate provides one.
    pub fn sigma(&self) -> Option<f64> {
        match self {
            Certificate::Delayed(r) if r.certified => Some(r.sigma),
            _ => None,
        }
    }
}

pub fn certificate_for(v: &Validated) -> Result<Certificate> {
    let tau = v.disc.tau;
    let theta = v.params.theta;
    let k = v.params.k;
    let report = &v.disc.kernel;
    if tau == 0.0 && theta <= 1.0 {
        let t = nodelay_threshold(report.mu0, report.mu_tilde, report.alpha, v.c_poincare())?;
        return Ok(Certificate::NoDelay {
            k,
            threshold: t.threshold,
            c1: t.c1,
            c2: t.c2,
        });
    }
    let inputs = CertificateInputs::from_kernel(report, tau, theta, v.c_poincare(), k);
    Ok(Certificate::Delayed(compute_constants(&inputs)?))
}

fn flat(cert: &Certificate) -> Map<String, Value> {
    let mut map = Map::new();
    match cert {
        Certificate::Delayed(r) => {
            if let Value::Object(fields) = serde_json::to_value(r).expect("report serializes") {
                for (key, value) in fields {
                    match value {
                        Value::Object(inner) if key == "inputs" => map.extend(inner),
                        other => {
                            map.insert(key, other);
                        }
                    }
                }
            }
        }
        Certificate::NoDelay { k, threshold, c1, c2 } => {
            map.insert("k".into(), json!(k));
            map.insert("c1".into(), json!(c1));
            map.insert("c2".into(), json!(c2));
            map.insert("k0".into(), json!(threshold));
            map.insert("certified".into(), json!(cert.certified()));
        }
    }
    map
}

fn human(cert: &Certificate, v: &Validated) -> String {
    let mut s = String::new();
    let d = &v.resolved.derived;
    let _ = writeln!(s, "tau (snapped)  {:.10}", d.tau_snapped);
    let _ = writeln!(s, "dt             {:.6e}", d.dt);
    let _ = writeln!(s, "C_P            {:.10}", d.c_poincare);
    match cert {
        Certificate::Delayed(r) => {
            let rows = [
                ("C0", r.c0),
                ("C1", r.c1),
                ("C2", r.c2),
                ("C*", r.c_star),
                ("C", r.c_big),
                ("sigma~", r.sigma_tilde),
                ("sigma", r.sigma),
                ("k_bar", r.k_bar),
                ("k_hat", r.k_hat),
                ("k0", r.k0),
                ("k0 lower bound", r.k0_explicit_lb),
                ("gamma1", r.gamma1),
                ("gamma2", r.gamma2),
            ];
            for (name, value) in rows {
                let _ = writeln!(s, "{name:<15}{value:.10e}");
            }
            let _ = writeln!(s, "|k| = {:e} {} k0", r.inputs.k.abs(), if r.certified { "<" } else { ">=" });
        }
        Certificate::NoDelay { k, threshold, c1, c2 } => {
            let _ = writeln!(s, "no delay: threshold 1/(e(C1 + 3 C2 + 1/alpha))");
            let _ = writeln!(s, "C1             {c1:.10e}");
            let _ = writeln!(s, "C2             {c2:.10e}");
            let _ = writeln!(s, "threshold      {threshold:.10e}");
            let _ = writeln!(s, "|k| = {:e}", k.abs());
        }
    }
    let _ = writeln!(s, "{}", if cert.certified() { "CERTIFIED" } else { "NOT CERTIFIED" });
    s
}

/// Writes `certificate.json` and `certificate.txt`; returns whether `k` is certified.
pub fn cmd_certify(config: &RunConfig, out: &Path, seed: u64) -> Result<bool> {
    let v = config.validate(seed)?;
    let cert = certificate_for(&v)?;
    let mut map = flat(&cert);
    map.insert("config".into(), serde_json::to_value(&v.resolved)?);
    write_json(out, "certificate.json", &Value::Object(map))?;
    write_text(out, "certificate.txt", &human(&cert, &v))?;
    Ok(cert.certified())
}
