//! Memory kernels `μ(s) = Σ aᵢ e^{−bᵢ s}` and the quantities derived from them.
//!
//! A finite Prony series satisfies the three standing kernel assumptions by
//! construction as long as every amplitude and rate is positive and the total
//! mass stays below one:
//!
//! 1. `μ(0) = μ₀ = Σ aᵢ > 0`,
//! 2. `∫₀^∞ μ = μ̃ = Σ aᵢ/bᵢ < 1`,
//! 3. `μ′(s) ≤ −α μ(s)` with `α = min bᵢ`.
//!
//! An empty series means "no memory": `μ ≡ 0`, and the solver drops the
//! history variable entirely.

mod quadrature;

pub use quadrature::{geometric_nodes, HistoryGrid};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default relative tail tolerance used to truncate the history axis.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PronyTerm {
    /// Amplitude, units 1/time².
    pub a: f64,
    /// Decay rate, units 1/time.
    pub b: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryKernel {
    pub terms: Vec<PronyTerm>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("kernel violates {0}")]
    KernelInvalid(String),
    #[error("tail tolerance must lie in (0, 1), got {0}")]
    BadTailTolerance(f64),
}

/// Closed-form kernel quantities plus the history truncation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub mu0: f64,
    pub mu_tilde: f64,
    /// Largest admissible decay constant; `+∞` for the empty kernel.
    pub alpha: f64,
    /// History axis is truncated to `[0, s_max]`.
    pub s_max: f64,
    /// `∫_{s_max}^∞ μ(s) ds`.
    pub tail_mass: f64,
}

impl MemoryKernel {
    pub fn new(terms: Vec<PronyTerm>) -> Self {
        Self { terms }
    }

    /// `μ ≡ 0`.
    pub fn none() -> Self {
        Self::default()
    }

    pub fn single(a: f64, b: f64) -> Self {
        Self::new(vec![PronyTerm { a, b }])
    }

    /// `μ(s) = e^{−2s}`: `μ₀ = 1`, `μ̃ = 1/2`, `α = 2`.
    pub fn worked_example() -> Self {
        Self::single(1.0, 2.0)
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn value(&self, s: f64) -> f64 {
        self.terms.iter().map(|t| t.a * (-t.b * s).exp()).sum()
    }

    /// `μ′(s)`
    pub fn derivative(&self, s: f64) -> f64 {
        self.terms.iter().map(|t| -t.a * t.b * (-t.b * s).exp()).sum()
    }

    pub fn mu0(&self) -> f64 {
        self.terms.iter().map(|t| t.a).sum()
    }

    pub fn mu_tilde(&self) -> f64 {
        self.terms.iter().map(|t| t.a / t.b).sum()
    }

    pub fn alpha(&self) -> f64 {
        self.terms.iter().map(|t| t.b).fold(f64::INFINITY, f64::min)
    }

    /// `∫_s^∞ μ`
    pub fn tail_mass(&self, s: f64) -> f64 {
        self.terms.iter().map(|t| t.a / t.b * (-t.b * s).exp()).sum()
    }
}

/// `μ(s)`, exact.
pub fn kernel_value(kernel: &MemoryKernel, s: f64) -> f64 {
    kernel.value(s)
}

/// Checks the kernel assumptions and computes `μ₀`, `μ̃`, `α` and the
/// truncation point `s_max`, the smallest `s` with
/// `∫_s^∞ μ ≤ tail_tol · μ̃`.
pub fn validate_kernel(kernel: &MemoryKernel, tail_tol: f64) -> Result<KernelReport, KernelError> {
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(KernelError::BadTailTolerance(tail_tol));
    }
    for (i, t) in kernel.terms.iter().enumerate() {
        if !(t.a.is_finite() && t.a > 0.0) {
            return Err(KernelError::KernelInvalid(format!(
                "assumption (i): term {i} has amplitude a = {} (must be positive, so that μ ≥ 0 and μ(0) > 0)",
                t.a
            )));
        }
        if !(t.b.is_finite() && t.b > 0.0) {
            return Err(KernelError::KernelInvalid(format!(
                "assumption (iii): term {i} has rate b = {} (must be positive, so that μ′ ≤ −αμ for some α > 0)",
                t.b
            )));
        }
    }
    if kernel.is_empty() {
        return Ok(KernelReport {
            mu0: 0.0,
            mu_tilde: 0.0,
            alpha: f64::INFINITY,
            s_max: 0.0,
            tail_mass: 0.0,
        });
    }
    let mu_tilde = kernel.mu_tilde();
    if mu_tilde >= 1.0 {
        return Err(KernelError::KernelInvalid(format!(
            "assumption (ii): ∫μ = {mu_tilde} must be strictly below 1"
        )));
    }

    let target = tail_tol * mu_tilde;
    let mut hi = 1.0 / kernel.alpha();
    while kernel.tail_mass(hi) > target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if kernel.tail_mass(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    Ok(KernelReport {
        mu0: kernel.mu0(),
        mu_tilde,
        alpha: kernel.alpha(),
        s_max: hi,
        tail_mass: kernel.tail_mass(hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson, used as an independent check on the closed forms.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
            let m = 0.5 * (a + b);
            let fm = f(m);
            (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
        }
        #[allow(clippy::too_many_arguments)]
        fn recurse(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            fa: f64,
            b: f64,
            fb: f64,
            whole: f64,
            m: f64,
            fm: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let (lm, flm, left) = simpson(f, a, fa, m, fm);
            let (rm, frm, right) = simpson(f, m, fm, b, fb);
            let delta = left + right - whole;
            if depth == 0 || delta.abs() <= 15.0 * tol {
                return left + right + delta / 15.0;
            }
            recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
        let (fa, fb) = (f(a), f(b));
        let (m, fm, whole) = simpson(f, a, fa, b, fb);
        recurse(f, a, fa, b, fb, whole, m, fm, tol, 50)
    }

    #[test]
    fn worked_kernel_constants() {
        let r = validate_kernel(&MemoryKernel::worked_example(), DEFAULT_TAIL_TOL).unwrap();
        assert_eq!(r.mu0, 1.0);
        assert_eq!(r.mu_tilde, 0.5);
        assert_eq!(r.alpha, 2.0);
        assert!(r.tail_mass <= DEFAULT_TAIL_TOL * r.mu_tilde);
        // e^{-2 s}/2 = 1e-8 / 2
        assert!((r.s_max - (1e8f64).ln() / 2.0).abs() < 1e-9);
    }

    #[test]
    fn empty_kernel_disables_memory() {
        let r = validate_kernel(&MemoryKernel::none(), DEFAULT_TAIL_TOL).unwrap();
        assert_eq!(r.mu0, 0.0);
        assert_eq!(r.mu_tilde, 0.0);
        assert!(r.alpha.is_infinite());
        assert_eq!(kernel_value(&MemoryKernel::none(), 3.0), 0.0);
    }

    #[test]
    fn two_term_kernel_against_numeric_quadrature() {
        let k = MemoryKernel::new(vec![PronyTerm { a: 0.3, b: 1.0 }, PronyTerm { a: 0.2, b: 4.0 }]);
        let r = validate_kernel(&k, DEFAULT_TAIL_TOL).unwrap();
        assert!((r.mu_tilde - 0.35).abs() < 1e-15);
        assert_eq!(r.alpha, 1.0);
        assert!((r.mu0 - 0.5).abs() < 1e-15);
        let numeric = adaptive_simpson(&|s| k.value(s), 0.0, 100.0, 1e-13);
        assert!((numeric - r.mu_tilde).abs() < 1e-10, "{numeric}");
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_value(&MemoryKernel::worked_example(), 0.0), 1.0);
        let k = MemoryKernel::new(vec![PronyTerm { a: 0.3, b: 1.0 }, PronyTerm { a: 0.2, b: 4.0 }]);
        let hand = 0.3 * (-1.0f64).exp() + 0.2 * (-4.0f64).exp();
        assert!((kernel_value(&k, 1.0) - hand).abs() < 1e-16);
        assert!((kernel_value(&k, 1.0) - 0.114_027).abs() < 1e-6);
    }

    #[test]
    fn rejections_name_the_assumption() {
        let err = |k: MemoryKernel| match validate_kernel(&k, 1e-8) {
            Err(KernelError::KernelInvalid(reason)) => reason,
            other => panic!("expected rejection, got {other:?}"),
        };
        assert!(err(MemoryKernel::single(-1.0, 2.0)).contains("(i)"));
        assert!(err(MemoryKernel::single(0.0, 2.0)).contains("(i)"));
        assert!(err(MemoryKernel::single(1.0, 0.0)).contains("(iii)"));
        assert!(err(MemoryKernel::single(1.0, -3.0)).contains("(iii)"));
        assert!(err(MemoryKernel::single(1.0, 1.0)).contains("(ii)"));
        assert!(err(MemoryKernel::single(2.0, 1.5)).contains("(ii)"));
        assert!(matches!(
            validate_kernel(&MemoryKernel::worked_example(), 1.0),
            Err(KernelError::BadTailTolerance(_))
        ));
    }

    #[test]
    fn validation_is_deterministic() {
        let k = MemoryKernel::new(vec![PronyTerm { a: 0.7, b: 3.0 }, PronyTerm { a: 0.1, b: 0.5 }]);
        assert_eq!(validate_kernel(&k, 1e-6), validate_kernel(&k, 1e-6));
    }

    #[test]
    fn decay_assumption_holds_pointwise() {
        let k = MemoryKernel::new(vec![
            PronyTerm { a: 0.4, b: 0.8 },
            PronyTerm { a: 1.5, b: 9.0 },
            PronyTerm { a: 0.05, b: 0.3 },
        ]);
        let alpha = k.alpha();
        for i in 0..200 {
            let s = 1e-4 * 10f64.powf(i as f64 * 0.03);
            let lhs = k.derivative(s);
            let rhs = -alpha * k.value(s);
            assert!(lhs <= rhs * (1.0 - 1e-14), "s={s}: {lhs} > {rhs}");
        }
    }
}
