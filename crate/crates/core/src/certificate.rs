//! Explicit exponential-stability constants.
//!
//! Given the kernel quantities `(μ₀, μ̃, α)`, the delay `τ`, the energy weight
//! `θ`, the Poincaré constant `C_P` and the delay gain `k`, this module
//! evaluates the chain
//!
//! ```text
//! C₀ → C₁, C₂ → C* = C₀C₂ + C₁ + C₂ → C = C* + 1 + 1/α → σ̃ = 1/C → σ = σ̃ − eθ|k|e^τ
//! ```
//!
//! together with the smallness threshold `k̄`, the fixed point `k̂ = g(k̂)` of
//! `g(|k|) = 1/(C(|k|)·e·θ·e^τ)`, and the certified bound `k₀ = min(k̂, k̄)`.

use std::f64::consts::{E, PI};
use std::ops::{Add, Div, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::KernelReport;

/// Sharp Poincaré constant `(L/π)²` of `(0, L)` with Dirichlet conditions.
pub fn poincare_constant_interval(length: f64) -> f64 {
    (length / PI).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateInputs {
    pub mu0: f64,
    pub mu_tilde: f64,
    pub alpha: f64,
    pub tau: f64,
    pub theta: f64,
    pub c_poincare: f64,
    pub k: f64,
}

impl CertificateInputs {
    pub fn from_kernel(report: &KernelReport, tau: f64, theta: f64, c_poincare: f64, k: f64) -> Self {
        Self {
            mu0: report.mu0,
            mu_tilde: report.mu_tilde,
            alpha: report.alpha,
            tau,
            theta,
            c_poincare,
            k,
        }
    }

    /// `μ₀ = 1, μ̃ = ½, α = 2, τ = 1, θ = 2, C_P = 1/π², k = 0`.
    pub fn worked_example() -> Self {
        Self {
            mu0: 1.0,
            mu_tilde: 0.5,
            alpha: 2.0,
            tau: 1.0,
            theta: 2.0,
            c_poincare: 1.0 / (PI * PI),
            k: 0.0,
        }
    }

    pub fn with_k(self, k: f64) -> Self {
        Self { k, ..self }
    }

    /// `θ|k|e^τ`, the extra damping of the auxiliary problem.
    pub fn delay_coupling(&self) -> f64 {
        self.theta * self.k.abs() * self.tau.exp()
    }

    fn check_kernel(&self) -> Result<(), CertificateError> {
        let bad = |what: &str| Err(CertificateError::InvalidInputs(what.to_string()));
        if !(self.mu_tilde > 0.0 && self.mu_tilde < 1.0) {
            return bad("mu_tilde must lie in (0, 1)");
        }
        if !(self.mu0.is_finite() && self.mu0 > 0.0) {
            return bad("mu0 must be positive");
        }
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return bad("alpha must be positive");
        }
        if !(self.c_poincare.is_finite() && self.c_poincare > 0.0) {
            return bad("c_poincare must be positive");
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CertificateError> {
        self.check_kernel()?;
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(CertificateError::InvalidInputs("tau must be finite and non-negative".into()));
        }
        if !self.k.is_finite() {
            return Err(CertificateError::InvalidInputs("k must be finite".into()));
        }
        if !(self.theta.is_finite() && self.theta > 1.0) {
            return Err(CertificateError::ThetaOutOfRange(self.theta));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error("invalid certificate inputs: {0}")]
    InvalidInputs(String),
    #[error("theta must exceed 1 when a delay is present, got {0}")]
    ThetaOutOfRange(f64),
    #[error("fixed-point bisection did not converge in {0} iterations")]
    NoConvergence(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_star: f64,
    pub c_big: f64,
    pub sigma_tilde: f64,
    pub sigma: f64,
    pub k_bar: f64,
    pub k_hat: f64,
    pub k0: f64,
    pub k0_explicit_lb: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub epsilon_star: f64,
    pub delta_star: f64,
    /// `|k| < k̄`; `sigma` only carries a guarantee when this holds.
    pub k_below_k_bar: bool,
    /// `|k| < k₀`.
    pub certified: bool,
    pub inputs: CertificateInputs,
}

/// `C₀ = 2 + θ|k|e^τ`
pub fn c0(inputs: &CertificateInputs) -> f64 {
    2.0 + inputs.delay_coupling()
}

/// `C₁ = 4(1 + μ̃/(α(1−μ̃)) + C_P/(1−μ̃) + 1/(2(θ−1)))`
pub fn c1(inputs: &CertificateInputs) -> f64 {
    let CertificateInputs { mu_tilde: m, alpha, theta, c_poincare: cp, .. } = *inputs;
    4.0 * (1.0 + m / (alpha * (1.0 - m)) + cp / (1.0 - m) + 0.5 / (theta - 1.0))
}

/// `C₂` at `ε = ε*`, with the two `k`-dependent pieces passed explicitly:
/// `delay_coupling = θ|k|e^τ` and `poincare_coupling = C_P|k|(θe^τ + 1)`.
pub fn c2_with_couplings(inputs: &CertificateInputs, delay_coupling: f64, poincare_coupling: f64) -> f64 {
    let CertificateInputs { mu0, mu_tilde: m, alpha, theta, c_poincare: cp, .. } = *inputs;
    // (1−μ̃)²/(μ̃ ε*) with ε* = (1−μ̃)/(2(C₀+1))
    let eps_term = (6.0 + 2.0 * delay_coupling) * (1.0 - m) / m;
    4.0 / m * (1.0 + 0.5 / (theta - 1.0) + mu0 * cp / m)
        + 4.0 * cp
        + 2.0 / alpha * (2.0 + eps_term + poincare_coupling)
}

pub fn c2(inputs: &CertificateInputs) -> f64 {
    let poincare_coupling = inputs.c_poincare * inputs.k.abs() * (inputs.theta * inputs.tau.exp() + 1.0);
    c2_with_couplings(inputs, inputs.delay_coupling(), poincare_coupling)
}

/// `C(|k|) = C₀C₂ + C₁ + C₂ + 1 + 1/α` evaluated at the given `|k|`.
pub fn c_big(inputs: &CertificateInputs) -> f64 {
    let c0 = c0(inputs);
    let c2 = c2(inputs);
    c0 * c2 + c1(inputs) + c2 + 1.0 + 1.0 / inputs.alpha
}

/// `k̄ = min{(1−μ̃)/(2C_P(θe^τ+1)), (μ̃/2θ)e^{−τ}}`
pub fn k_bar(inputs: &CertificateInputs) -> f64 {
    let CertificateInputs { mu_tilde: m, tau, theta, c_poincare: cp, .. } = *inputs;
    let structural = (1.0 - m) / (2.0 * cp * (theta * tau.exp() + 1.0));
    let memory = m / (2.0 * theta) * (-tau).exp();
    structural.min(memory)
}

/// `g(x) = 1/(C(x)·e·θ·e^τ)`
pub fn fixed_point_map(inputs: &CertificateInputs, x: f64) -> f64 {
    let at = inputs.with_k(x);
    1.0 / (c_big(&at) * E * inputs.theta * inputs.tau.exp())
}

const BISECTION_TOL: f64 = 1e-12;
const BISECTION_CAP: usize = 200;

/// Unique `k̂ > 0` with `k̂ = g(k̂)`, by bisection on `[0, g(0)]`.
pub fn khat_fixed_point(inputs: &CertificateInputs) -> Result<f64, CertificateError> {
    inputs.validate()?;
    let (mut lo, mut hi) = (0.0, fixed_point_map(inputs, 0.0));
    for _ in 0..BISECTION_CAP {
        if hi - lo <= BISECTION_TOL {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if fixed_point_map(inputs, mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(CertificateError::NoConvergence(BISECTION_CAP))
}

/// Minimal field arithmetic so the `γ` formulas can also run on exact rationals.
pub trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> {
    fn int(n: i64) -> Self;
}

impl Scalar for f64 {
    fn int(n: i64) -> Self {
        n as f64
    }
}

/// `γ₁(μ̃) = 4μ̃/(1−μ̃) − 8 + 36/μ̃ − (23/2)μ̃ − (3/2)μ̃²`
pub fn gamma1<T: Scalar>(mu_tilde: T) -> T {
    let n = T::int;
    let m = mu_tilde;
    n(4) * m / (n(1) - m) - n(8) + n(36) / m - n(23) / n(2) * m - n(3) / n(2) * m * m
}

/// `γ₂(μ₀, μ̃, θ, C_P)`
pub fn gamma2<T: Scalar>(mu0: T, mu_tilde: T, theta: T, c_poincare: T) -> T {
    let n = T::int;
    let (m, cp) = (mu_tilde, c_poincare);
    let t1 = theta - n(1);
    n(6) + n(12) * cp + n(3) / t1 + n(12) / m + n(6) / (m * t1)
        + n(12) * mu0 / (m * m) * cp
        + n(2) * mu0 / m * cp
        + n(2) * cp * m
        + n(4) * cp / (n(1) - m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplicitBound {
    pub k0_lb: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

/// `k₀ ≥ e^{−(τ+1)} / (θ(1 + γ₁/α + γ₂))`
pub fn explicit_lower_bound(inputs: &CertificateInputs) -> Result<ExplicitBound, CertificateError> {
    inputs.validate()?;
    let g1 = gamma1(inputs.mu_tilde);
    let g2 = gamma2(inputs.mu0, inputs.mu_tilde, inputs.theta, inputs.c_poincare);
    let k0_lb = (-(inputs.tau + 1.0)).exp() / (inputs.theta * (1.0 + g1 / inputs.alpha + g2));
    Ok(ExplicitBound { k0_lb, gamma1: g1, gamma2: g2 })
}

pub fn compute_constants(inputs: &CertificateInputs) -> Result<ConstantsReport, CertificateError> {
    inputs.validate()?;
    let c0v = c0(inputs);
    let c1v = c1(inputs);
    let c2v = c2(inputs);
    let c_star = c0v * c2v + c1v + c2v;
    let c_bigv = c_star + 1.0 + 1.0 / inputs.alpha;
    let sigma_tilde = 1.0 / c_bigv;
    let sigma = sigma_tilde - E * inputs.delay_coupling();
    let k_barv = k_bar(inputs);
    let k_hat = khat_fixed_point(inputs)?;
    let k0 = k_hat.min(k_barv);
    let bound = explicit_lower_bound(inputs)?;
    Ok(ConstantsReport {
        c0: c0v,
        c1: c1v,
        c2: c2v,
        c_star,
        c_big: c_bigv,
        sigma_tilde,
        sigma,
        k_bar: k_barv,
        k_hat,
        k0,
        k0_explicit_lb: bound.k0_lb,
        gamma1: bound.gamma1,
        gamma2: bound.gamma2,
        epsilon_star: (1.0 - inputs.mu_tilde) / (2.0 * (c0v + 1.0)),
        delta_star: inputs.mu_tilde / 2.0,
        k_below_k_bar: inputs.k.abs() < k_barv,
        certified: inputs.k.abs() < k0,
        inputs: *inputs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoDelayThreshold {
    pub c1: f64,
    pub c2: f64,
    pub threshold: f64,
}

/// Stability threshold on `|k|` for `τ = 0`, where `θ = 1` is admissible:
/// `|k| < 1/(e(C₁ + 3C₂ + 1/α))`.
pub fn nodelay_threshold(
    mu0: f64,
    mu_tilde: f64,
    alpha: f64,
    c_poincare: f64,
) -> Result<NoDelayThreshold, CertificateError> {
    let probe = CertificateInputs { mu0, mu_tilde, alpha, tau: 0.0, theta: 2.0, c_poincare, k: 0.0 };
    probe.check_kernel()?;
    let m = mu_tilde;
    let c1 = 4.0 * (1.0 + m / (alpha * (1.0 - m)) + c_poincare / (1.0 - m));
    let c2 = 2.0 / m * (2.0 + mu0 / m * c_poincare)
        + 4.0 * c_poincare
        + 2.0 / alpha * (2.0 + 6.0 * (1.0 - m) / m);
    let threshold = 1.0 / (E * (c1 + 3.0 * c2 + 1.0 / alpha));
    Ok(NoDelayThreshold { c1, c2, threshold })
}

/// Formula set used by [`gamma_identity_defect`]; swapping an entry lets a
/// caller confirm that the check actually notices a wrong formula.
#[derive(Clone, Copy)]
pub struct Formulas {
    pub c1: fn(&CertificateInputs) -> f64,
    pub c2_with_couplings: fn(&CertificateInputs, f64, f64) -> f64,
}

impl Formulas {
    pub const STANDARD: Formulas = Formulas { c1, c2_with_couplings };
}

impl Default for Formulas {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// Relative gap between `1 + γ₁/α + γ₂` and the linear majorant of
/// `1 + 1/α + C₂(C₀+1) + C₁` obtained from `|k| < k̄`
/// (`θ|k|e^τ ≤ μ̃/2`, `C_P|k|(θe^τ+1) ≤ (1−μ̃)/2`).
///
/// The two are algebraically equal, so the result is rounding noise unless a
/// formula is wrong.
pub fn gamma_identity_defect(inputs: &CertificateInputs, formulas: Formulas) -> f64 {
    let m = inputs.mu_tilde;
    let c2 = (formulas.c2_with_couplings)(inputs, m / 2.0, (1.0 - m) / 2.0);
    let majorant = 1.0 + 1.0 / inputs.alpha + c2 * (3.0 + m / 2.0) + (formulas.c1)(inputs);
    let gammas = 1.0
        + gamma1(m) / inputs.alpha
        + gamma2(inputs.mu0, m, inputs.theta, inputs.c_poincare);
    (majorant - gammas).abs() / gammas.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn poincare_scaling() {
        assert!(rel(poincare_constant_interval(PI), 1.0) < 1e-15);
        assert!(rel(poincare_constant_interval(2.0), 4.0 * poincare_constant_interval(1.0)) < 1e-15);
    }

    #[test]
    fn zero_gain_removes_delay_coupling() {
        let r = compute_constants(&CertificateInputs::worked_example()).unwrap();
        assert_eq!(r.c0, 2.0);
        assert_eq!(r.sigma, r.sigma_tilde);
        assert_eq!(r.sigma_tilde, 1.0 / r.c_big);
        assert_eq!(r.k0, r.k_hat.min(r.k_bar));
        assert!(r.certified && r.k_below_k_bar);
    }

    #[test]
    fn c0_with_gain() {
        let inputs = CertificateInputs::worked_example().with_k(0.01);
        assert!(rel(c0(&inputs), 2.0 + 0.02 * E) < 1e-15);
        assert!((c0(&inputs) - 2.054366).abs() < 1e-6);
    }

    #[test]
    fn fixed_point_is_fixed() {
        let inputs = CertificateInputs::worked_example();
        let k = khat_fixed_point(&inputs).unwrap();
        assert!((fixed_point_map(&inputs, k) - k).abs() <= 1e-10 * k);
        assert!((k - 8.85e-4).abs() < 5e-6, "{k}");
    }

    #[test]
    fn theta_guard() {
        let inputs = CertificateInputs { theta: 1.0, ..CertificateInputs::worked_example() };
        assert_eq!(compute_constants(&inputs), Err(CertificateError::ThetaOutOfRange(1.0)));
        let inputs = CertificateInputs { mu_tilde: 1.0, ..CertificateInputs::worked_example() };
        assert!(matches!(compute_constants(&inputs), Err(CertificateError::InvalidInputs(_))));
    }

    #[test]
    fn nodelay_worked_kernel() {
        let cp = 1.0 / (PI * PI);
        let t = nodelay_threshold(1.0, 0.5, 2.0, cp).unwrap();
        assert!(rel(t.c1, 6.0 + 8.0 * cp) < 1e-14);
        assert!(rel(t.c2, 16.0 + 12.0 * cp) < 1e-14);
        assert!((t.threshold - 6.24e-3).abs() < 5e-6, "{}", t.threshold);
    }

    #[test]
    fn tampered_c1_breaks_the_gamma_identity() {
        let inputs = CertificateInputs::worked_example();
        assert!(gamma_identity_defect(&inputs, Formulas::STANDARD) < 1e-13);
        let tampered = Formulas { c1: |i| c1(i) * 1.01, ..Formulas::STANDARD };
        assert!(gamma_identity_defect(&inputs, tampered) > 1e-4);
    }
}
