//! Independent reference computations shared by the integration tests and
//! the acceptance runner. Nothing here calls into the formulas it is used to
//! check.
#![allow(dead_code)]

use std::f64::consts::{E, PI};
use std::ops::{Add, Div, Mul, Sub};

use num_rational::Ratio;
use viscowave::certificate::{CertificateInputs, Scalar};

/// Smallest eigenvalue of the `n`-point finite-difference Dirichlet Laplacian
/// on `(0, length)`, by inverse iteration.
pub fn fd_dirichlet_eigenvalue(length: f64, n: usize) -> f64 {
    let h = length / (n + 1) as f64;
    let diag = 2.0 / (h * h);
    let off = -1.0 / (h * h);
    let solve = |rhs: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = off / diag;
        d[0] = rhs[0] / diag;
        for i in 1..n {
            let m = diag - off * c[i - 1];
            c[i] = off / m;
            d[i] = (rhs[i] - off * d[i - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    };
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 3) as f64 * 0.1).collect();
    let mut lambda = 0.0;
    for _ in 0..500 {
        let y = solve(&x);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rayleigh = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|v| v * v).sum::<f64>();
        let next = 1.0 / rayleigh;
        x = y.iter().map(|v| v / norm).collect();
        if (next - lambda).abs() < 1e-15 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// `1/λ₁` extrapolated from grids with 63, 127 and 255 interior points.
pub fn poincare_oracle(length: f64) -> f64 {
    let l1 = fd_dirichlet_eigenvalue(length, 63);
    let l2 = fd_dirichlet_eigenvalue(length, 127);
    let l3 = fd_dirichlet_eigenvalue(length, 255);
    // two Richardson passes: h² then h⁴
    let r1 = (4.0 * l2 - l1) / 3.0;
    let r2 = (4.0 * l3 - l2) / 3.0;
    let lambda = (16.0 * r2 - r1) / 15.0;
    1.0 / lambda
}

/// Left-hand side of the fixed-point condition written as a single
/// expression in `x = |k|`:
/// `h(x) = x θ e^{τ+1} [1 + 1/α + C₂(x)(3 + θxe^τ) + C₁]`.
pub fn h_condition(i: &CertificateInputs, x: f64) -> f64 {
    let m = i.mu_tilde;
    let et = i.tau.exp();
    let c2 = 4.0 / m * (1.0 + 1.0 / (2.0 * (i.theta - 1.0)) + i.mu0 / m * i.c_poincare)
        + 4.0 * i.c_poincare
        + 2.0 / i.alpha
            * (2.0 + (6.0 + 2.0 * i.theta * x * et) * (1.0 - m) / m + i.c_poincare * x * (i.theta * et + 1.0));
    let c1 = 4.0 * (1.0 + m / (i.alpha * (1.0 - m)) + i.c_poincare / (1.0 - m) + 1.0 / (2.0 * (i.theta - 1.0)));
    x * i.theta * (i.tau + 1.0).exp() * (1.0 + 1.0 / i.alpha + c2 * (3.0 + i.theta * x * et) + c1)
}

/// Root of `h(x) = 1` located by scanning `x` in steps of `step` up to `upper`.
pub fn khat_dense_scan(inputs: &CertificateInputs, upper: f64, step: f64) -> f64 {
    let mut prev = 0.0;
    let mut x = step;
    while x <= upper + step {
        if h_condition(inputs, x) >= 1.0 {
            return 0.5 * (prev + x);
        }
        prev = x;
        x += step;
    }
    f64::NAN
}

/// Hand-derived constants for `μ₀ = 1, μ̃ = ½, α = 2, τ = 1, θ = 2, k = 0`
/// as functions of `C_P`.
pub struct WorkedConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_star: f64,
    pub c_big: f64,
    pub k_bar: f64,
}

pub fn worked_constants(cp: f64) -> WorkedConstants {
    WorkedConstants {
        c0: 2.0,
        c1: 8.0 + 8.0 * cp,
        c2: 20.0 + 20.0 * cp,
        c_star: 68.0 + 68.0 * cp,
        c_big: 69.5 + 68.0 * cp,
        // memory branch μ̃/(2θ)·e^{-τ} = 1/(8e) is the smaller one
        k_bar: 0.125 / E,
    }
}

pub fn worked_nodelay_threshold(cp: f64) -> f64 {
    let c1 = 6.0 + 8.0 * cp;
    let c2 = 16.0 + 12.0 * cp;
    1.0 / (E * (c1 + 3.0 * c2 + 0.5))
}

pub fn unit_poincare() -> f64 {
    1.0 / (PI * PI)
}

/// Exact rational wrapper so the generic `γ` formulas can be evaluated
/// without rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Q(pub Ratio<i128>);

impl Add for Q {
    type Output = Q;
    fn add(self, o: Q) -> Q {
        Q(self.0 + o.0)
    }
}
impl Sub for Q {
    type Output = Q;
    fn sub(self, o: Q) -> Q {
        Q(self.0 - o.0)
    }
}
impl Mul for Q {
    type Output = Q;
    fn mul(self, o: Q) -> Q {
        Q(self.0 * o.0)
    }
}
impl Div for Q {
    type Output = Q;
    fn div(self, o: Q) -> Q {
        Q(self.0 / o.0)
    }
}
impl Scalar for Q {
    fn int(n: i64) -> Self {
        Q(Ratio::from_integer(n as i128))
    }
}

pub fn q(n: i128, d: i128) -> Q {
    Q(Ratio::new(n, d))
}

/// Modal amplitude `y(t)` of `y″ = −λ(y − Σ qᵢ)`, `qᵢ′ = aᵢy − bᵢqᵢ`, the
/// exact finite-dimensional form of the memory term for a Prony kernel,
/// with frozen past `y ≡ y₀`. Classical RK4 with step `h`; returns `y` at
/// `t = n·h`.
pub fn modal_prony(lambda: f64, terms: &[(f64, f64)], y0: f64, h: f64, steps: usize) -> Vec<f64> {
    let dim = 2 + terms.len();
    let f = |s: &[f64]| -> Vec<f64> {
        let mut d = vec![0.0; dim];
        let q: f64 = s[2..].iter().sum();
        d[0] = s[1];
        d[1] = -lambda * (s[0] - q);
        for (i, &(a, b)) in terms.iter().enumerate() {
            d[2 + i] = a * s[0] - b * s[2 + i];
        }
        d
    };
    let mut s = vec![0.0; dim];
    s[0] = y0;
    for (i, &(a, b)) in terms.iter().enumerate() {
        s[2 + i] = a / b * y0;
    }
    let mut out = vec![y0];
    for _ in 0..steps {
        let k1 = f(&s);
        let t: Vec<f64> = s.iter().zip(&k1).map(|(x, k)| x + 0.5 * h * k).collect();
        let k2 = f(&t);
        let t: Vec<f64> = s.iter().zip(&k2).map(|(x, k)| x + 0.5 * h * k).collect();
        let k3 = f(&t);
        let t: Vec<f64> = s.iter().zip(&k3).map(|(x, k)| x + h * k).collect();
        let k4 = f(&t);
        for i in 0..dim {
            s[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        out.push(s[0]);
    }
    out
}

/// Same modal problem in its original integro-differential form
/// `y″ = −λ((1−μ̃)y + ∫₀^∞ μ(s)(y(t) − y(t−s)) ds)`, with the convolution
/// over the computed past summed directly (trapezoid) at every step and
/// the frozen part before `t = 0` added in closed form. Velocity Verlet
/// with step `h`.
pub fn modal_direct(lambda: f64, terms: &[(f64, f64)], y0: f64, h: f64, steps: usize) -> Vec<f64> {
    let mu = |s: f64| terms.iter().map(|&(a, b)| a * (-b * s).exp()).sum::<f64>();
    let tail = |s: f64| terms.iter().map(|&(a, b)| a / b * (-b * s).exp()).sum::<f64>();
    let mu_tilde = tail(0.0);
    let weights: Vec<f64> = (0..=steps).map(|j| mu(j as f64 * h)).collect();
    let mut y = vec![y0];
    let accel = |y: &[f64]| -> f64 {
        let n = y.len() - 1;
        let t = n as f64 * h;
        let yt = y[n];
        // ∫₀ᵗ μ(s) y(t − s) ds
        let mut conv = 0.0;
        if n > 0 {
            conv = 0.5 * (weights[0] * yt + weights[n] * y[0]);
            for j in 1..n {
                conv += weights[j] * y[n - j];
            }
            conv *= h;
        }
        let memory = mu_tilde * yt - conv - tail(t) * y0;
        -lambda * ((1.0 - mu_tilde) * yt + memory)
    };
    let mut v = 0.0;
    let mut a = accel(&y);
    for _ in 0..steps {
        let n = y.len() - 1;
        let next = y[n] + h * v + 0.5 * h * h * a;
        y.push(next);
        let a_next = accel(&y);
        v += 0.5 * h * (a + a_next);
        a = a_next;
    }
    y
}

/// `‖a − b‖₂ / ‖b‖₂` over equally spaced samples.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// A trace carrying only totals (all in the kinetic slot), for checks that
/// look at nothing else.
pub fn synthetic_trace(times: &[f64], totals: &[f64], mode: viscowave::solver::Mode) -> viscowave::solver::Trace {
    use viscowave::energy::{EnergyBreakdown, Probes};
    use viscowave::solver::{Sample, Trace};
    Trace {
        mode,
        k: 0.0,
        theta: 2.0,
        tau: 0.0,
        dt: 1.0,
        dx: 1.0,
        nx: 1,
        samples: times
            .iter()
            .zip(totals)
            .map(|(&t, &f)| Sample {
                t,
                energy: EnergyBreakdown::new(f, 0.0, 0.0, 0.0),
                probes: Probes::default(),
            })
            .collect(),
        snapshots: Vec::new(),
    }
}
