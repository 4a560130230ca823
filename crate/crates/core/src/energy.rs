//! The energy functional
//!
//! ```text
//! F = ½∫u_t² + (1−μ̃)/2 ∫|∇u|² + ½∫∫μ|∇η|² + (θ|k|e^τ/2) ∫_{t−τ}^t e^{−(t−s)} ∫u_t²(s)
//! ```
//!
//! and its dissipation balance.
//!
//! Gradients live on cell edges (forward differences), which pairs with the
//! 3-point Laplacian so that summation by parts holds exactly on the grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Tridiagonal;
use crate::solver::{Discretization, Mode, ModelParams, SimState, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub elastic: f64,
    pub memory: f64,
    pub delay: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(kinetic: f64, elastic: f64, memory: f64, delay: f64) -> Self {
        Self {
            kinetic,
            elastic,
            memory,
            delay,
            total: kinetic + elastic + memory + delay,
        }
    }
}

/// Quantities entering `F′`, recorded alongside each energy sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Probes {
    /// `½∫∫μ′|∇η|²` (non-positive).
    pub memory_dissipation: f64,
    /// `−½μ(s_max)∫|∇η(s_max)|²`, the flux through the truncated end of the history axis.
    pub outflow: f64,
    /// `∫u_t²`
    pub v_norm2: f64,
    /// `∫u_t²(t − τ)`
    pub vd_norm2: f64,
    /// `∫u_t u_t(t − τ)`
    pub v_dot_vd: f64,
    /// `∫_{t−τ}^t e^{−(t−s)} ∫u_t²(s) ds`
    pub delay_integral: f64,
}

pub(crate) fn norm2(field: &[f64], dx: f64) -> f64 {
    field.iter().map(|v| v * v).sum::<f64>() * dx
}

/// `∫|∇u|²` with boundary values included in `u`.
pub(crate) fn gradient_norm2(u: &[f64], dx: f64) -> f64 {
    u.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / dx
}

/// `Σ_edges dx · (∇x)ᵀ A (∇y)` for two stacks of free history rows (interior
/// nodes only; the fields vanish on the boundary).
pub(crate) fn edge_bilinear(a: &Tridiagonal, x: &[f64], y: &[f64], nx: usize, dx: f64) -> f64 {
    let rows = a.len();
    let diff = |f: &[f64], r: usize, e: usize| -> f64 {
        let row = &f[r * nx..(r + 1) * nx];
        let right = if e < nx { row[e] } else { 0.0 };
        let left = if e > 0 { row[e - 1] } else { 0.0 };
        right - left
    };
    let mut acc = 0.0;
    for r in 0..rows {
        let (mut own, mut up, mut down) = (0.0, 0.0, 0.0);
        for e in 0..=nx {
            let dx_r = diff(x, r, e);
            own += dx_r * diff(y, r, e);
            if r + 1 < rows {
                up += dx_r * diff(y, r + 1, e);
                down += diff(x, r + 1, e) * diff(y, r, e);
            }
        }
        acc += a.diag[r] * own;
        if r + 1 < rows {
            acc += a.upper[r] * up + a.lower[r] * down;
        }
    }
    acc / dx
}

pub(crate) fn edge_form(a: &Tridiagonal, eta_free: &[f64], nx: usize, dx: f64) -> f64 {
    edge_bilinear(a, eta_free, eta_free, nx, dx)
}

/// `∫_{t−τ}^t e^{−(t−s)} ∫u_t²(s) ds` from whatever holds the velocity history.
fn delay_integral(state: &SimState, disc: &Discretization) -> f64 {
    let dx = disc.dx;
    if let Some(line) = &state.delay_line {
        let n = line.lags();
        let mut acc = 0.5 * norm2(line.lag(0), dx) + 0.5 * (-(n as f64) * disc.dt).exp() * norm2(line.lag(n), dx);
        for lag in 1..n {
            acc += (-(lag as f64) * disc.dt).exp() * norm2(line.lag(lag), dx);
        }
        acc * disc.dt
    } else if disc.n_rho > 0 {
        // s = t − τρ
        let n = disc.n_rho;
        let nx = disc.nx;
        let drho = 1.0 / n as f64;
        let z = state.z();
        let mut acc = 0.5 * norm2(&state.v()[1..=nx], dx);
        for j in 1..=n {
            let w = if j == n { 0.5 } else { 1.0 };
            acc += w * (-disc.tau * j as f64 * drho).exp() * norm2(&z[(j - 1) * nx..j * nx], dx);
        }
        acc * disc.tau * drho
    } else {
        0.0
    }
}

/// Term-by-term value of `F` for one state.
pub fn energy(state: &SimState, params: &ModelParams, disc: &Discretization) -> EnergyBreakdown {
    let dx = disc.dx;
    let nx = disc.nx;
    let kinetic = 0.5 * norm2(&state.v()[1..=nx], dx);
    let elastic = 0.5 * (1.0 - disc.kernel.mu_tilde) * gradient_norm2(state.u(), dx);
    let memory = match &disc.history {
        Some(grid) => 0.5 * edge_form(grid.mass(), &state.eta()[nx..], nx, dx),
        None => 0.0,
    };
    let coupling = params.damping_at(disc.tau);
    let delay = if coupling == 0.0 { 0.0 } else { 0.5 * coupling * delay_integral(state, disc) };
    EnergyBreakdown::new(kinetic, elastic, memory, delay)
}

pub fn probes(state: &SimState, disc: &Discretization) -> Probes {
    let dx = disc.dx;
    let nx = disc.nx;
    let v = &state.v()[1..=nx];
    let vd = state.delayed_velocity();
    let (memory_dissipation, outflow) = match &disc.history {
        Some(grid) => {
            let eta_free = &state.eta()[nx..];
            let last = &eta_free[(grid.len() - 2) * nx..];
            (
                0.5 * edge_form(grid.slope_mass(), eta_free, nx, dx),
                -0.5 * grid.end_value() * gradient_norm2_interior(last, dx),
            )
        }
        None => (0.0, 0.0),
    };
    Probes {
        memory_dissipation,
        outflow,
        v_norm2: norm2(v, dx),
        vd_norm2: norm2(vd, dx),
        v_dot_vd: v.iter().zip(vd).map(|(a, b)| a * b).sum::<f64>() * dx,
        delay_integral: delay_integral(state, disc),
    }
}

fn gradient_norm2_interior(row: &[f64], dx: f64) -> f64 {
    let n = row.len();
    let mut acc = row[0] * row[0] + row[n - 1] * row[n - 1];
    for w in row.windows(2) {
        acc += (w[1] - w[0]).powi(2);
    }
    acc / dx
}

/// Right-hand side of the auxiliary-problem dissipation estimate
/// `F′ ≤ ½∫∫μ′|∇η|² − |k|(θe^τ−1)/2 ∫u_t² − |k|(θ−1)/2 ∫u_t²(t−τ) − (θ|k|e^τ/2)∫e^{−(t−s)}∫u_t²`.
pub fn dissipation_bound(p: &Probes, k: f64, theta: f64, tau: f64) -> f64 {
    let a = k.abs();
    p.memory_dissipation
        - 0.5 * a * (theta * tau.exp() - 1.0) * p.v_norm2
        - 0.5 * a * (theta - 1.0) * p.vd_norm2
        - 0.5 * theta * a * tau.exp() * p.delay_integral
}

/// Exact `F′` of the semi-discrete system in the given mode.
pub fn energy_rate(p: &Probes, mode: Mode, k: f64, theta: f64, tau: f64) -> f64 {
    let coupling = theta * k.abs() * tau.exp();
    let damping = if mode == Mode::Auxiliary { coupling } else { 0.0 };
    p.memory_dissipation + p.outflow - damping * p.v_norm2 - k * p.v_dot_vd
        + 0.5 * coupling * p.v_norm2
        - 0.5 * theta * k.abs() * p.vd_norm2
        - 0.5 * coupling * p.delay_integral
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("dissipation check needs a trace of the auxiliary problem")]
    WrongMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    /// `max(ΔF/Δt − R)` over sample pairs, `R` the dissipation bound averaged
    /// over the pair; non-positive when the estimate holds everywhere.
    pub max_violation: f64,
    /// Largest `F(t_{i+1}) − F(t_i)`; non-positive for a monotone trace.
    pub max_increase: f64,
    /// `max |ΔF/Δt − F′|` with `F′` the exact rate averaged over the pair;
    /// pure time-discretization error.
    pub identity_defect: f64,
    /// Tolerance applied to both `max_violation · Δt` and `max_increase`.
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks that `F` decreases along an auxiliary-problem trace and that the
/// decrease is at least as fast as the dissipation estimate predicts.
///
/// `ΔF/Δt` over each sample pair is compared with the trapezoid average of
/// the estimate at both ends; both sides then agree to second order in the
/// sample spacing.
pub fn check_dissipation(trace: &Trace, params: &ModelParams) -> Result<DissipationReport, EnergyError> {
    if trace.mode != Mode::Auxiliary || params.mode != Mode::Auxiliary {
        return Err(EnergyError::WrongMode);
    }
    let tau = trace.tau;
    let f0 = trace.samples.first().map_or(0.0, |s| s.energy.total);
    let tolerance = 1e-6 * f0;
    let mut max_violation = f64::NEG_INFINITY;
    let mut max_increase = f64::NEG_INFINITY;
    let mut identity_defect: f64 = 0.0;
    let mut violation_ok = true;
    for pair in trace.samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.t - a.t;
        let df = b.energy.total - a.energy.total;
        let slope = df / dt;
        let bound = 0.5
            * (dissipation_bound(&a.probes, params.k, params.theta, tau)
                + dissipation_bound(&b.probes, params.k, params.theta, tau));
        let rate = 0.5
            * (energy_rate(&a.probes, trace.mode, params.k, params.theta, tau)
                + energy_rate(&b.probes, trace.mode, params.k, params.theta, tau));
        max_violation = max_violation.max(slope - bound);
        violation_ok &= (slope - bound) * dt <= tolerance;
        max_increase = max_increase.max(df);
        identity_defect = identity_defect.max((slope - rate).abs());
    }
    if trace.samples.len() < 2 {
        max_violation = 0.0;
        max_increase = 0.0;
    }
    Ok(DissipationReport {
        max_violation,
        max_increase,
        identity_defect,
        tolerance,
        pass: violation_ok && max_increase <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{GridSpec, InitialData, Solver};
    use std::f64::consts::PI;

    #[test]
    fn sine_mode_energy_at_start() {
        let params = ModelParams::worked_example(0.0, Mode::Original);
        let mut errors = Vec::new();
        for nx in [49, 99, 199] {
            let solver = Solver::from_spec(params.clone(), &GridSpec::default().with_nx(nx)).unwrap();
            let state = solver.build(&InitialData::sine(1));
            let e = energy(&state, &params, solver.discretization());
            assert_eq!(e.kinetic, 0.0);
            assert_eq!(e.memory, 0.0);
            assert_eq!(e.delay, 0.0);
            let exact = 0.25 * 0.5 * PI * PI;
            errors.push((e.elastic - exact).abs() / exact);
        }
        assert!(errors[0] < 1e-3);
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
        }
    }

    #[test]
    fn zero_gain_has_no_delay_energy() {
        let params = ModelParams::worked_example(0.0, Mode::Auxiliary);
        let mut solver = Solver::from_spec(params.clone(), &GridSpec::default().with_nx(20)).unwrap();
        let mut state = solver.build(&InitialData::sine(1));
        for _ in 0..100 {
            solver.step(&mut state).unwrap();
        }
        let e = energy(&state, &params, solver.discretization());
        assert_eq!(e.delay, 0.0);
        assert!(e.kinetic > 0.0 && e.memory > 0.0);
        assert_eq!(e.total, e.kinetic + e.elastic + e.memory + e.delay);
    }

    #[test]
    fn edge_form_of_identity_is_gradient_norm() {
        let nx = 7;
        let dx = 0.125;
        let mut id = Tridiagonal::zeros(1);
        id.diag[0] = 1.0;
        let row: Vec<f64> = (1..=nx).map(|i| (i as f64 * dx * PI).sin()).collect();
        let mut full = vec![0.0];
        full.extend_from_slice(&row);
        full.push(0.0);
        let a = edge_form(&id, &row, nx, dx);
        assert!((a - gradient_norm2(&full, dx)).abs() < 1e-14);
        assert!((a - gradient_norm2_interior(&row, dx)).abs() < 1e-14);
    }
}
