use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use viscowave::certificate::poincare_constant_interval;
use viscowave::kernel::MemoryKernel;
use viscowave::solver::{DelayRealization, Discretization, GridSpec, InitialData, Mode, ModelParams};

/// Run description read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: Option<MemoryKernel>,
    #[serde(rename = "L", default = "defaults::length")]
    pub length: f64,
    #[serde(default = "defaults::nx")]
    pub nx: usize,
    #[serde(default = "defaults::cfl")]
    pub cfl: f64,
    #[serde(default = "defaults::ns")]
    pub ns: usize,
    #[serde(default = "defaults::tail_tol")]
    pub tail_tol: f64,
    #[serde(default = "defaults::n_rho")]
    pub n_rho: usize,
    pub tau: Option<f64>,
    #[serde(default)]
    pub k: f64,
    pub theta: Option<f64>,
    /// Overrides the Poincaré constant of `(0, L)`.
    #[serde(default)]
    pub c_poincare: Option<f64>,
    #[serde(default = "defaults::mode")]
    pub mode: Mode,
    #[serde(default)]
    pub delay_realization: DelayRealization,
    #[serde(default = "defaults::init")]
    pub init: InitialData,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    #[serde(default = "defaults::sample_every")]
    pub sample_every: usize,
    #[serde(default)]
    pub snapshots: bool,
    #[serde(default = "defaults::snapshot_every")]
    pub snapshot_every: usize,
    /// Interval `[S, T]` for the memory identity; defaults to
    /// `[T/10, min(T, T/10 + 10)]`.
    #[serde(default)]
    pub snapshot_window: Option<(f64, f64)>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub k_values: Option<Vec<f64>>,
    #[serde(default)]
    pub k_min: Option<f64>,
    #[serde(default)]
    pub k_max: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub theta_values: Option<Vec<f64>>,
}

mod defaults {
    use super::*;

    pub fn length() -> f64 {
        1.0
    }
    pub fn nx() -> usize {
        GridSpec::default().nx
    }
    pub fn cfl() -> f64 {
        GridSpec::default().cfl
    }
    pub fn ns() -> usize {
        GridSpec::default().ns
    }
    pub fn tail_tol() -> f64 {
        GridSpec::default().tail_tol
    }
    pub fn n_rho() -> usize {
        GridSpec::default().n_rho
    }
    pub fn mode() -> Mode {
        Mode::Original
    }
    pub fn init() -> InitialData {
        InitialData::sine(1)
    }
    pub fn sample_every() -> usize {
        10
    }
    pub fn snapshot_every() -> usize {
        4
    }
}

/// Derived quantities echoed into every output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Derived {
    pub dx: f64,
    pub dt: f64,
    pub n_delay: usize,
    /// Delay actually simulated and certified, `n_delay · dt`.
    pub tau_snapped: f64,
    pub c_poincare: f64,
    pub s_max: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub config: RunConfig,
    pub derived: Derived,
}

impl Resolved {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// A config that passed every check, with its solver-side counterparts.
#[derive(Debug, Clone)]
pub struct Validated {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub disc: Discretization,
    pub resolved: Resolved,
}

impl Validated {
    pub fn c_poincare(&self) -> f64 {
        self.resolved.derived.c_poincare
    }
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        bail!("{name}: must be positive and finite, got {v}");
    }
    Ok(())
}

impl RunConfig {
    /// Checks the fields every subcommand needs and builds the discretization.
    pub fn validate(&self, seed: u64) -> Result<Validated> {
        let Some(kernel) = self.kernel.clone() else {
            bail!("kernel: missing");
        };
        let Some(tau) = self.tau else {
            bail!("tau: missing");
        };
        let Some(theta) = self.theta else {
            bail!("theta: missing");
        };
        positive("L", self.length)?;
        if !(tau.is_finite() && tau >= 0.0) {
            bail!("tau: must be finite and non-negative, got {tau}");
        }
        if !theta.is_finite() {
            bail!("theta: must be finite, got {theta}");
        }
        if !self.k.is_finite() {
            bail!("k: must be finite, got {}", self.k);
        }
        if let Some(cp) = self.c_poincare {
            positive("c_poincare", cp)?;
        }
        for (i, term) in kernel.terms.iter().enumerate() {
            positive(&format!("kernel.terms[{i}].a"), term.a)?;
            positive(&format!("kernel.terms[{i}].b"), term.b)?;
        }
        if self.sample_every == 0 {
            bail!("sample_every: must be at least 1");
        }
        if self.snapshot_every == 0 {
            bail!("snapshot_every: must be at least 1");
        }
        if let Some(t) = self.horizon {
            positive("T", t)?;
        }
        let params = ModelParams {
            length: self.length,
            tau,
            k: self.k,
            theta,
            kernel,
            mode: self.mode,
            delay_realization: self.delay_realization,
        };
        let grid = GridSpec {
            nx: self.nx,
            cfl: self.cfl,
            ns: self.ns,
            tail_tol: self.tail_tol,
            n_rho: self.n_rho,
        };
        let disc = Discretization::new(&params, &grid).context("grid")?;
        let derived = Derived {
            dx: disc.dx,
            dt: disc.dt,
            n_delay: disc.n_delay,
            tau_snapped: disc.tau,
            c_poincare: self.c_poincare.unwrap_or_else(|| poincare_constant_interval(self.length)),
            s_max: disc.kernel.s_max,
            seed,
        };
        Ok(Validated {
            params,
            grid,
            disc,
            resolved: Resolved {
                config: self.clone(),
                derived,
            },
        })
    }

    pub fn horizon(&self) -> Result<f64> {
        self.horizon.context("T: missing")
    }

    pub fn snapshot_window(&self, horizon: f64) -> (f64, f64) {
        self.snapshot_window.unwrap_or((0.1 * horizon, horizon.min(0.1 * horizon + 10.0)))
    }

    /// The sweep's gains, sorted ascending.
    pub fn sweep_gains(&self) -> Result<Vec<f64>> {
        let mut ks = match (&self.k_values, self.k_min, self.k_max, self.count) {
            (Some(v), _, _, _) => v.clone(),
            (None, Some(lo), Some(hi), Some(n)) => {
                if n == 0 {
                    bail!("count: must be at least 1");
                }
                if n == 1 {
                    vec![lo]
                } else {
                    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
                }
            }
            _ => bail!("k_values: missing (or give k_min, k_max and count)"),
        };
        if ks.is_empty() {
            bail!("k_values: empty");
        }
        if let Some(i) = ks.iter().position(|k| !k.is_finite()) {
            bail!("k_values[{i}]: not finite");
        }
        ks.sort_by(f64::total_cmp);
        Ok(ks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> RunConfig {
        serde_json::from_str(r#"{"kernel": {"terms": [{"a": 1.0, "b": 2.0}]}, "tau": 1.0, "theta": 2.0, "k": 0.0005}"#)
            .unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = worked();
        assert_eq!((c.length, c.nx, c.ns, c.cfl), (1.0, 200, 64, 0.25));
        assert_eq!(c.init, InitialData::sine(1));
        let v = c.validate(0).unwrap();
        assert!((v.resolved.derived.tau_snapped - 1.0).abs() < 1e-12);
        assert!((v.c_poincare() - 1.0 / std::f64::consts::PI.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn errors_name_the_field() {
        let mut c = worked();
        c.tau = None;
        assert!(c.validate(0).unwrap_err().to_string().starts_with("tau"));
        let mut c = worked();
        c.kernel = Some(MemoryKernel::single(-1.0, 2.0));
        assert!(c.validate(0).unwrap_err().to_string().contains("kernel.terms[0].a"));
        let c: Result<RunConfig, _> = serde_json::from_str(r#"{"nx": 10, "bogus": 1}"#);
        assert!(c.unwrap_err().to_string().contains("bogus"));
    }

    #[test]
    fn sweep_gains_sorted_and_checked() {
        let mut c = worked();
        c.k_values = Some(vec![0.02, -0.02, 0.0]);
        assert_eq!(c.sweep_gains().unwrap(), vec![-0.02, 0.0, 0.02]);
        c.k_values = Some(vec![]);
        assert!(c.sweep_gains().unwrap_err().to_string().starts_with("k_values"));
        c.k_values = None;
        c.k_min = Some(0.0);
        c.k_max = Some(1.0);
        c.count = Some(3);
        assert_eq!(c.sweep_gains().unwrap(), vec![0.0, 0.5, 1.0]);
    }
}
