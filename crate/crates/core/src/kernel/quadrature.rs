//! Piecewise-linear discretization of the history axis `s ∈ [0, s_max]`.
//!
//! Every integral against the kernel is taken exactly for the piecewise
//! linear interpolant of the history field: with hat functions `φⱼ` on the
//! node set,
//!
//! ```text
//! Wⱼ    = ∫ μ φⱼ            (memory force / energy weights)
//! W′ⱼ   = ∫ μ′ φⱼ
//! Mᵢⱼ   = ∫ μ φᵢ φⱼ          (μ-weighted mass)
//! M′ᵢⱼ  = ∫ μ′ φᵢ φⱼ
//! Kᵢⱼ   = ∫ μ φᵢ φⱼ′         (transport)
//! ```
//!
//! The matrices are restricted to the free nodes `1..n`; node 0 carries the
//! inflow condition `η(s = 0) = 0`. With that restriction
//! `K + Kᵀ = μ(s_max) e_N e_Nᵀ − M′`, which is the discrete form of
//! `∫ μ η η_s = ½ μ(s_max) η(s_max)² − ½ ∫ μ′ η²`.

use super::MemoryKernel;
use crate::linalg::{Tridiagonal, TridiagonalLu};

/// `∫₀¹ ξⁿ e^{−βξ} dξ` for `n = 0, 1, 2`.
fn exp_moments(beta: f64) -> [f64; 3] {
    if beta < 0.5 {
        // Series; the closed forms cancel catastrophically near β = 0.
        let mut out = [0.0; 3];
        let mut term = 1.0;
        for m in 0..30 {
            for (n, slot) in out.iter_mut().enumerate() {
                *slot += term / (n + m + 1) as f64;
            }
            term *= -beta / (m + 1) as f64;
        }
        out
    } else {
        let e = (-beta).exp();
        let b2 = beta * beta;
        [
            (1.0 - e) / beta,
            (1.0 - (1.0 + beta) * e) / b2,
            (2.0 - (2.0 + 2.0 * beta + b2) * e) / (b2 * beta),
        ]
    }
}

/// Geometric node set `0 = s₀ < s₁ < … < s_{n−1} = s_max` with first
/// interval `first` (or a uniform grid when `first` is too coarse for the
/// geometric growth to be needed).
pub fn geometric_nodes(count: usize, first: f64, s_max: f64) -> Vec<f64> {
    assert!(count >= 2, "history grid needs at least two nodes");
    assert!(first > 0.0 && s_max > 0.0);
    let intervals = (count - 1) as f64;
    if first * intervals >= s_max {
        return (0..count).map(|j| s_max * j as f64 / intervals).collect();
    }
    // Solve first·(rⁿ − 1)/(r − 1) = s_max for the ratio r > 1.
    let span = |r: f64| first * (r.powf(intervals) - 1.0) / (r - 1.0);
    let (mut lo, mut hi) = (1.0 + 1e-12, 2.0);
    while span(hi) < s_max {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if span(mid) > s_max {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let ratio = 0.5 * (lo + hi);
    let mut nodes = Vec::with_capacity(count);
    let mut s = 0.0;
    let mut h = first;
    nodes.push(0.0);
    for _ in 1..count - 1 {
        s += h;
        nodes.push(s);
        h *= ratio;
    }
    nodes.push(s_max);
    nodes
}

/// Kernel-weighted quadrature and Galerkin operators on a history grid.
#[derive(Debug, Clone)]
pub struct HistoryGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    slope_weights: Vec<f64>,
    mass: Tridiagonal,
    slope_mass: Tridiagonal,
    transport: Tridiagonal,
    mass_lu: TridiagonalLu,
    end_value: f64,
}

impl HistoryGrid {
    pub fn new(kernel: &MemoryKernel, nodes: Vec<f64>) -> Self {
        let n = nodes.len();
        assert!(n >= 2, "history grid needs at least two nodes");
        assert!(
            nodes.windows(2).all(|w| w[1] > w[0]) && nodes[0] == 0.0,
            "history nodes must increase strictly from 0"
        );
        let mut weights = vec![0.0; n];
        let mut slope_weights = vec![0.0; n];
        let mut mass = Tridiagonal::zeros(n);
        let mut slope_mass = Tridiagonal::zeros(n);
        let mut transport = Tridiagonal::zeros(n);

        for e in 0..n - 1 {
            let (s0, s1) = (nodes[e], nodes[e + 1]);
            let h = s1 - s0;
            for term in &kernel.terms {
                let scale = term.a * (-term.b * s0).exp() * h;
                let [i0, i1, i2] = exp_moments(term.b * h);
                let w = [scale * (i0 - i1), scale * i1];
                let m = [
                    [scale * (i0 - 2.0 * i1 + i2), scale * (i1 - i2)],
                    [scale * (i1 - i2), scale * i2],
                ];
                // φ_L′ = −1/h, φ_R′ = 1/h
                let k = [[-w[0] / h, w[0] / h], [-w[1] / h, w[1] / h]];
                for a in 0..2 {
                    weights[e + a] += w[a];
                    slope_weights[e + a] -= term.b * w[a];
                    for b in 0..2 {
                        mass.add(e + a, e + b, m[a][b]);
                        slope_mass.add(e + a, e + b, -term.b * m[a][b]);
                        transport.add(e + a, e + b, k[a][b]);
                    }
                }
            }
        }

        let free = |t: &Tridiagonal| Tridiagonal {
            lower: t.lower[1..].to_vec(),
            diag: t.diag[1..].to_vec(),
            upper: t.upper[1..].to_vec(),
        };
        let mass = free(&mass);
        let mass_lu = mass.factor().expect("kernel-weighted mass matrix is positive definite");
        let end_value = kernel.value(nodes[n - 1]);
        Self {
            weights,
            slope_weights,
            slope_mass: free(&slope_mass),
            transport: free(&transport),
            mass,
            mass_lu,
            nodes,
            end_value,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn s_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// `Wⱼ = ∫ μ φⱼ` for every node, including the inflow node.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `W′ⱼ = ∫ μ′ φⱼ` for every node.
    pub fn slope_weights(&self) -> &[f64] {
        &self.slope_weights
    }

    /// `∫₀^{s_max} μ f` for nodal values `f`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, f)| w * f).sum()
    }

    /// Mass matrix on the free nodes.
    pub fn mass(&self) -> &Tridiagonal {
        &self.mass
    }

    pub fn slope_mass(&self) -> &Tridiagonal {
        &self.slope_mass
    }

    pub fn transport(&self) -> &Tridiagonal {
        &self.transport
    }

    pub fn mass_lu(&self) -> &TridiagonalLu {
        &self.mass_lu
    }

    /// `μ(s_max)`, the outflow weight.
    pub fn end_value(&self) -> f64 {
        self.end_value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{validate_kernel, PronyTerm};

    #[test]
    fn moments_are_continuous_across_the_series_switch() {
        let below = exp_moments(0.5 - 1e-12);
        let above = exp_moments(0.5);
        for n in 0..3 {
            assert!((below[n] - above[n]).abs() < 1e-12);
        }
        assert_eq!(exp_moments(0.0), [1.0, 0.5, 1.0 / 3.0]);
    }

    #[test]
    fn geometric_nodes_hit_the_end_point() {
        let nodes = geometric_nodes(64, 0.005, 9.21);
        assert_eq!(nodes.len(), 64);
        assert_eq!(nodes[0], 0.0);
        assert!((nodes[1] - 0.005).abs() < 1e-15);
        assert_eq!(*nodes.last().unwrap(), 9.21);
        let ratios: Vec<f64> = nodes.windows(3).map(|w| (w[2] - w[1]) / (w[1] - w[0])).collect();
        for r in &ratios[..ratios.len() - 1] {
            assert!((r - ratios[0]).abs() < 1e-9);
        }
        let uniform = geometric_nodes(5, 1.0, 2.0);
        assert_eq!(uniform, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn weights_reproduce_truncated_mass() {
        let kernel = MemoryKernel::new(vec![PronyTerm { a: 0.3, b: 1.0 }, PronyTerm { a: 0.2, b: 4.0 }]);
        let report = validate_kernel(&kernel, 1e-8).unwrap();
        for count in [8, 32, 64, 200] {
            let grid = HistoryGrid::new(&kernel, geometric_nodes(count, 0.01, report.s_max));
            let total = grid.integrate(&vec![1.0; count]);
            let expected = report.mu_tilde - report.tail_mass;
            assert!(((total - expected) / expected).abs() < 1e-12, "{count}: {total}");
            let slope_total: f64 = grid.slope_weights().iter().sum();
            // ∫₀^{s_max} μ′ = μ(s_max) − μ(0)
            assert!((slope_total - (kernel.value(report.s_max) - report.mu0)).abs() < 1e-12);
        }
    }

    #[test]
    fn transport_symmetric_part_is_boundary_minus_slope_mass() {
        let kernel = MemoryKernel::worked_example();
        let grid = HistoryGrid::new(&kernel, geometric_nodes(20, 0.05, 9.0));
        let k = grid.transport();
        let kt = k.transpose();
        let n = k.len();
        for i in 0..n {
            let sym = k.diag[i] + kt.diag[i];
            let mut expected = -grid.slope_mass().diag[i];
            if i == n - 1 {
                expected += grid.end_value();
            }
            assert!((sym - expected).abs() < 1e-14, "row {i}");
        }
        for i in 0..n - 1 {
            assert!((k.upper[i] + kt.upper[i] + grid.slope_mass().upper[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_functions_are_integrated_exactly() {
        // ∫₀^S s e^{−2s} ds in closed form
        let kernel = MemoryKernel::worked_example();
        let s_max = 5.0;
        let grid = HistoryGrid::new(&kernel, geometric_nodes(12, 0.1, s_max));
        let exact = 0.25 * (1.0 - (1.0 + 2.0 * s_max) * (-2.0 * s_max).exp());
        let got = grid.integrate(grid.nodes());
        assert!((got - exact).abs() < 1e-14);
    }
}
