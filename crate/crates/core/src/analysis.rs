//! Decay-rate fits and checks of the quantitative decay statements on traces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::{Discretization, Mode, Trace};

/// Samples with `F` below this are ignored by the fit.
pub const ENERGY_FLOOR: f64 = 1e-30;
pub const MIN_FIT_SAMPLES: usize = 10;
pub const DEFAULT_GROWTH_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} samples above the floor in the fit window, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("horizon too short: F(T)/F(0) = {ratio:e} exceeds 1e-3")]
    HorizonTooShort { ratio: f64 },
    #[error("trace has no snapshots in the requested interval")]
    SnapshotsMissing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Negated slope of `ln F` against `t`.
    pub sigma_emp: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Least-squares line through `(t, ln F)`; `window` defaults to `[0.2T, 0.9T]`.
pub fn fit_decay_rate(trace: &Trace, window: Option<(f64, f64)>) -> Result<DecayFit, AnalysisError> {
    fit_log_linear(&trace.times(), &trace.totals(), window)
}

pub fn fit_log_linear(times: &[f64], values: &[f64], window: Option<(f64, f64)>) -> Result<DecayFit, AnalysisError> {
    let horizon = times.last().copied().unwrap_or(0.0);
    let window = window.unwrap_or((0.2 * horizon, 0.9 * horizon));
    let points: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(&t, &f)| t >= window.0 && t <= window.1 && f > ENERGY_FLOOR)
        .map(|(&t, &f)| (t, f.ln()))
        .collect();
    if points.len() < MIN_FIT_SAMPLES {
        return Err(AnalysisError::InsufficientData {
            needed: MIN_FIT_SAMPLES,
            found: points.len(),
        });
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, y) in &points {
        stt += (t - mean_t) * (t - mean_t);
        sty += (t - mean_t) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    let slope = sty / stt;
    let r_squared = if syy == 0.0 { 1.0 } else { (sty * sty / (stt * syy)).clamp(0.0, 1.0) };
    Ok(DecayFit {
        sigma_emp: -slope,
        r_squared,
        window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Decaying,
    Growing,
    Inconclusive,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Decaying => "decaying",
            Classification::Growing => "growing",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

pub fn classify(fit: &DecayFit, growth_threshold: f64) -> Classification {
    if fit.r_squared <= 0.9 {
        Classification::Inconclusive
    } else if fit.sigma_emp > growth_threshold {
        Classification::Decaying
    } else if fit.sigma_emp < -growth_threshold {
        Classification::Growing
    } else {
        Classification::Inconclusive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub ok: bool,
    /// `min (1 − F(t)/(F(0)e^{1−σt}))`; negative where the envelope is exceeded.
    pub worst_margin: f64,
    /// First sample time that broke the envelope beyond the tolerance.
    pub first_violation: Option<f64>,
}

/// `F(t) ≤ F(0) e^{1−σt} (1 + tol)` at every sample.
pub fn check_theorem_bound(trace: &Trace, sigma: f64, tol: f64) -> EnvelopeCheck {
    let f0 = trace.samples.first().map_or(0.0, |s| s.energy.total);
    let mut worst_margin = f64::INFINITY;
    let mut first_violation = None;
    for s in &trace.samples {
        let envelope = f0 * (1.0 - sigma * s.t).exp();
        if envelope == 0.0 {
            if s.energy.total > 0.0 && first_violation.is_none() {
                first_violation = Some(s.t);
                worst_margin = f64::NEG_INFINITY;
            }
            continue;
        }
        let margin = 1.0 - s.energy.total / envelope;
        worst_margin = worst_margin.min(margin);
        if s.energy.total > envelope * (1.0 + tol) && first_violation.is_none() {
            first_violation = Some(s.t);
        }
    }
    EnvelopeCheck {
        ok: first_violation.is_none(),
        worst_margin,
        first_violation,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralCheck {
    pub ok: bool,
    /// `max_S ∫_S^T F / F(S)`, the empirical integral constant.
    pub worst_ratio: f64,
}

/// `∫_S^T F dt ≤ C F(S)(1 + tol)` for every sample `S`.
pub fn check_integral_inequality(trace: &Trace, c_big: f64, tol: f64) -> Result<IntegralCheck, AnalysisError> {
    let totals = trace.totals();
    let times = trace.times();
    let (Some(&first), Some(&last)) = (totals.first(), totals.last()) else {
        return Ok(IntegralCheck { ok: true, worst_ratio: 0.0 });
    };
    if last > 1e-3 * first {
        return Err(AnalysisError::HorizonTooShort { ratio: last / first });
    }
    let mut tail = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut ok = true;
    for i in (0..totals.len()).rev() {
        if i + 1 < totals.len() {
            tail += 0.5 * (totals[i] + totals[i + 1]) * (times[i + 1] - times[i]);
        }
        if totals[i] > 0.0 {
            let ratio = tail / totals[i];
            worst_ratio = worst_ratio.max(ratio);
            ok &= ratio <= c_big * (1.0 + tol);
        }
    }
    Ok(IntegralCheck { ok, worst_ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryIdentity {
    /// Snapshot times actually used.
    pub interval: (f64, f64),
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / (|lhs| + |rhs| + floor)`
    pub residual: f64,
}

/// Both sides of the identity obtained by testing the momentum equation with
/// `m = ∫μη ds`:
///
/// ```text
/// μ̃∫‖u_t‖² = [⟨u_t, m⟩] − ∫⟨u_t, ∫μ′η⟩ + (1−μ̃)∫⟨∇u, ∇m⟩ + ∫‖∇m‖²
///            + a∫⟨u_t, m⟩ + k∫⟨u_t(t−τ), m⟩
/// ```
///
/// with `a = θ|k|e^τ` for the auxiliary problem and `0` otherwise. Time
/// integrals use the trapezoid rule over the snapshots in `[s, t]`.
pub fn check_memory_identity(trace: &Trace, disc: &Discretization, s: f64, t: f64) -> Result<MemoryIdentity, AnalysisError> {
    let eps = 1e-9 * trace.dt;
    let snaps: Vec<_> = trace.snapshots.iter().filter(|x| x.t >= s - eps && x.t <= t + eps).collect();
    if snaps.len() < 2 {
        return Err(AnalysisError::SnapshotsMissing);
    }
    let Some(grid) = &disc.history else {
        let interval = (snaps[0].t, snaps[snaps.len() - 1].t);
        return Ok(MemoryIdentity { interval, lhs: 0.0, rhs: 0.0, residual: 0.0 });
    };
    let nx = disc.nx;
    let dx = disc.dx;
    let w = grid.weights();
    let wp = grid.slope_weights();
    let mu_tilde = disc.kernel.mu_tilde;
    let damping = match trace.mode {
        Mode::Auxiliary => trace.theta * trace.k.abs() * trace.tau.exp(),
        Mode::Original => 0.0,
    };

    struct Terms {
        t: f64,
        kinetic: f64,
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        g: f64,
    }
    let terms: Vec<Terms> = snaps
        .iter()
        .map(|snap| {
            let mut m = vec![0.0; nx + 2];
            let mut mp = vec![0.0; nx + 2];
            for j in 1..grid.len() {
                let row = &snap.eta[j * nx..(j + 1) * nx];
                for i in 0..nx {
                    m[i + 1] += w[j] * row[i];
                    mp[i + 1] += wp[j] * row[i];
                }
            }
            let v = &snap.v[1..=nx];
            let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() * dx;
            let edge = |x: &[f64], y: &[f64]| {
                x.windows(2).zip(y.windows(2)).map(|(p, q)| (p[1] - p[0]) * (q[1] - q[0])).sum::<f64>() / dx
            };
            Terms {
                t: snap.t,
                kinetic: dot(v, v),
                a: dot(v, &m[1..=nx]),
                b: dot(v, &mp[1..=nx]),
                c: edge(&snap.u, &m),
                d: edge(&m, &m),
                g: dot(&snap.v_delayed, &m[1..=nx]),
            }
        })
        .collect();

    let integrate = |f: &dyn Fn(&Terms) -> f64| -> f64 {
        terms.windows(2).map(|p| 0.5 * (f(&p[0]) + f(&p[1])) * (p[1].t - p[0].t)).sum()
    };
    let first = &terms[0];
    let last = &terms[terms.len() - 1];
    let lhs = mu_tilde * integrate(&|x| x.kinetic);
    let rhs = (last.a - first.a) - integrate(&|x| x.b)
        + (1.0 - mu_tilde) * integrate(&|x| x.c)
        + integrate(&|x| x.d)
        + damping * integrate(&|x| x.a)
        + trace.k * integrate(&|x| x.g);
    let residual = (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + ENERGY_FLOOR);
    Ok(MemoryIdentity {
        interval: (first.t, last.t),
        lhs,
        rhs,
        residual,
    })
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: f64,
    pub theta: f64,
    pub sigma_emp: f64,
    pub r_squared: f64,
    pub classification: Classification,
    /// `|k| < k₀`
    pub certified: bool,
    pub theorem_bound_ok: bool,
    /// Set when the row's simulation or fit failed.
    pub error: Option<String>,
}
