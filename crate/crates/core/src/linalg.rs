//! Small banded linear algebra used by the history-variable discretization.

/// A square tridiagonal matrix stored by diagonals.
///
/// `lower[i]` sits at `(i + 1, i)` and `upper[i]` at `(i, i + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n.saturating_sub(1)],
            diag: vec![0.0; n],
            upper: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Adds `value` at `(row, col)`; `|row - col|` must be at most one.
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        if row == col {
            self.diag[row] += value;
        } else if row == col + 1 {
            self.lower[col] += value;
        } else if col == row + 1 {
            self.upper[row] += value;
        } else {
            panic!("({row}, {col}) is outside the tridiagonal band");
        }
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(y.len(), n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.len();
        let mut acc = 0.0;
        for i in 0..n {
            acc += x[i] * self.diag[i] * y[i];
            if i + 1 < n {
                acc += x[i] * self.upper[i] * y[i + 1] + x[i + 1] * self.lower[i] * y[i];
            }
        }
        acc
    }

    pub fn transpose(&self) -> Self {
        Self {
            lower: self.upper.clone(),
            diag: self.diag.clone(),
            upper: self.lower.clone(),
        }
    }

    /// LU factorization without pivoting (Thomas algorithm).
    ///
    /// Returns `None` if a pivot vanishes; the mass matrices factored here are
    /// symmetric positive definite, so that only happens for degenerate grids.
    pub fn factor(&self) -> Option<TridiagonalLu> {
        let n = self.len();
        let mut multipliers = vec![0.0; n.saturating_sub(1)];
        let mut pivots = vec![0.0; n];
        if n == 0 {
            return Some(TridiagonalLu {
                multipliers,
                pivots,
                upper: Vec::new(),
            });
        }
        pivots[0] = self.diag[0];
        for i in 1..n {
            if pivots[i - 1] == 0.0 || !pivots[i - 1].is_finite() {
                return None;
            }
            let l = self.lower[i - 1] / pivots[i - 1];
            multipliers[i - 1] = l;
            pivots[i] = self.diag[i] - l * self.upper[i - 1];
        }
        if pivots[n - 1] == 0.0 || !pivots[n - 1].is_finite() {
            return None;
        }
        Some(TridiagonalLu {
            multipliers,
            pivots,
            upper: self.upper.clone(),
        })
    }
}

/// Factored tridiagonal matrix, reusable across many right-hand sides.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    multipliers: Vec<f64>,
    pivots: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagonalLu {
    pub fn len(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivots.is_empty()
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        for i in 1..n {
            rhs[i] -= self.multipliers[i - 1] * rhs[i - 1];
        }
        if n == 0 {
            return;
        }
        rhs[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1]) / self.pivots[i];
        }
    }

    /// Solves for a block of right-hand sides stored row-major as
    /// `rows[j * width + i]`, one system per column `i`.
    ///
    /// Sweeping whole rows keeps the inner loop contiguous.
    pub fn solve_columns(&self, rows: &mut [f64], width: usize) {
        let n = self.len();
        debug_assert_eq!(rows.len(), n * width);
        for j in 1..n {
            let l = self.multipliers[j - 1];
            let (prev, cur) = rows.split_at_mut(j * width);
            let prev = &prev[(j - 1) * width..];
            for (c, p) in cur[..width].iter_mut().zip(prev) {
                *c -= l * p;
            }
        }
        if n == 0 {
            return;
        }
        let inv = 1.0 / self.pivots[n - 1];
        for c in &mut rows[(n - 1) * width..] {
            *c *= inv;
        }
        for j in (0..n - 1).rev() {
            let u = self.upper[j];
            let inv = 1.0 / self.pivots[j];
            let (cur, next) = rows.split_at_mut((j + 1) * width);
            let cur = &mut cur[j * width..];
            for (c, nx) in cur.iter_mut().zip(&next[..width]) {
                *c = (*c - u * nx) * inv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Tridiagonal {
        let mut m = Tridiagonal::zeros(4);
        for i in 0..4 {
            m.add(i, i, 4.0 + i as f64);
        }
        for i in 0..3 {
            m.add(i + 1, i, 1.0);
            m.add(i, i + 1, -0.5 * (i as f64 + 1.0));
        }
        m
    }

    #[test]
    fn solve_inverts_mul() {
        let m = sample();
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut b = [0.0; 4];
        m.mul_vec(&x, &mut b);
        let lu = m.factor().unwrap();
        lu.solve_in_place(&mut b);
        for (got, want) in b.iter().zip(&x) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn column_solve_matches_single_solves() {
        let m = sample();
        let lu = m.factor().unwrap();
        let width = 3;
        let mut rows: Vec<f64> = (0..12).map(|v| (v as f64).sin()).collect();
        let mut expected = Vec::new();
        for c in 0..width {
            let mut col: Vec<f64> = (0..4).map(|j| rows[j * width + c]).collect();
            lu.solve_in_place(&mut col);
            expected.push(col);
        }
        lu.solve_columns(&mut rows, width);
        for c in 0..width {
            for j in 0..4 {
                assert!((rows[j * width + c] - expected[c][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bilinear_matches_mul() {
        let m = sample();
        let x = [0.3, 1.0, -1.0, 2.0];
        let y = [1.0, 0.5, 0.25, -4.0];
        let mut my = [0.0; 4];
        m.mul_vec(&y, &mut my);
        let direct: f64 = x.iter().zip(&my).map(|(a, b)| a * b).sum();
        assert!((m.bilinear(&x, &y) - direct).abs() < 1e-14);
        assert_eq!(m.transpose().transpose(), m);
    }
}
