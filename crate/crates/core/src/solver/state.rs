use std::ops::Range;

/// Packing of the discrete unknowns into one vector.
///
/// `u` and `v` carry both boundary nodes (always zero). `η` is stored
/// s-major, `eta[j * nx + i]` at history node `j` and interior node `i + 1`,
/// with row `j = 0` the pinned inflow row. `z` holds `n_rho` rows for
/// `ρ = 1/n_rho, …, 1` when the delay is transported on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub nx: usize,
    pub ns: usize,
    pub n_rho: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        2 * (self.nx + 2) + (self.ns + self.n_rho) * self.nx
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn u_range(&self) -> Range<usize> {
        0..self.nx + 2
    }

    pub fn v_range(&self) -> Range<usize> {
        self.nx + 2..2 * (self.nx + 2)
    }

    pub fn eta_range(&self) -> Range<usize> {
        let start = 2 * (self.nx + 2);
        start..start + self.ns * self.nx
    }

    pub fn z_range(&self) -> Range<usize> {
        let start = self.eta_range().end;
        start..start + self.n_rho * self.nx
    }
}

/// The last `lags + 1` interior velocity fields, newest at lag 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine {
    width: usize,
    slots: usize,
    head: usize,
    data: Vec<f64>,
}

impl DelayLine {
    pub fn new(width: usize, lags: usize) -> Self {
        Self {
            width,
            slots: lags + 1,
            head: 0,
            data: vec![0.0; width * (lags + 1)],
        }
    }

    /// Largest stored lag (the delay in steps).
    pub fn lags(&self) -> usize {
        self.slots - 1
    }

    /// Field from `lag` steps ago.
    pub fn lag(&self, lag: usize) -> &[f64] {
        assert!(lag < self.slots);
        let slot = (self.head + lag) % self.slots;
        &self.data[slot * self.width..(slot + 1) * self.width]
    }

    /// Stores `field` as the new lag 0, dropping the oldest entry.
    pub fn push(&mut self, field: &[f64]) {
        self.head = (self.head + self.slots - 1) % self.slots;
        let slot = self.head;
        self.data[slot * self.width..(slot + 1) * self.width].copy_from_slice(field);
    }

    /// Delayed field at stage fraction `frac ∈ [0, 1]` of the step that
    /// starts at lag 0: linear between lags `n` and `n − 1`.
    pub fn interpolate(&self, frac: f64, out: &mut [f64]) {
        let n = self.lags();
        let old = self.lag(n);
        if frac == 0.0 {
            out.copy_from_slice(old);
            return;
        }
        let newer = self.lag(n - 1);
        for ((o, a), b) in out.iter_mut().zip(old).zip(newer) {
            *o = (1.0 - frac) * a + frac * b;
        }
    }
}

/// Discrete solution at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: u64,
    pub layout: Layout,
    /// Packed `(u, v, η, z)`, see [`Layout`].
    pub y: Vec<f64>,
    /// Present when the delay is realized by stored velocity fields.
    pub delay_line: Option<DelayLine>,
}

impl SimState {
    pub fn u(&self) -> &[f64] {
        &self.y[self.layout.u_range()]
    }

    pub fn v(&self) -> &[f64] {
        &self.y[self.layout.v_range()]
    }

    pub fn eta(&self) -> &[f64] {
        &self.y[self.layout.eta_range()]
    }

    pub fn z(&self) -> &[f64] {
        &self.y[self.layout.z_range()]
    }

    /// `u_t(t − τ)` on the interior nodes.
    pub fn delayed_velocity(&self) -> &[f64] {
        let nx = self.layout.nx;
        if let Some(line) = &self.delay_line {
            line.lag(line.lags())
        } else if self.layout.n_rho > 0 {
            &self.z()[(self.layout.n_rho - 1) * nx..]
        } else {
            &self.v()[1..=nx]
        }
    }
}
