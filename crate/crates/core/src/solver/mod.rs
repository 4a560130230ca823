//! Method-of-lines integrator for the wave equation with memory and delay.
//!
//! The unknowns are the displacement `u`, the velocity `v = u_t`, the history
//! variable `η(x, s)` and, optionally, a transported copy `z(x, ρ)` of the
//! delayed velocity. The semi-discrete system is
//!
//! ```text
//! u′ = v
//! v′ = (1 − μ̃) Δu + Δ ∫ μ η ds − k v(t − τ) − a v       (a = θ|k|e^τ in auxiliary mode)
//! η′ = −η_s + v,   η(s = 0) = 0
//! ```
//!
//! discretized with the 3-point Laplacian on `(0, L)`, piecewise-linear
//! Galerkin elements in `s`, and classical RK4 in time.

mod run;
mod spot_check;
mod state;

pub use run::{run, RunError, RunOptions, Sample, Snapshot, SnapshotOptions, Trace};
pub use spot_check::{dissipativity_spot_check, energy_inner, SpotCheckReport};
pub use state::{DelayLine, Layout, SimState};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{geometric_nodes, validate_kernel, HistoryGrid, KernelError, KernelReport, MemoryKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Original,
    /// Adds the damping `θ|k|e^τ u_t`.
    Auxiliary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayRealization {
    /// Stores past velocity fields; exact at whole steps.
    #[default]
    RingBuffer,
    /// Upwind transport of `z(ρ)` on a uniform grid in `ρ ∈ [0, 1]`.
    RhoGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub length: f64,
    pub tau: f64,
    pub k: f64,
    pub theta: f64,
    pub kernel: MemoryKernel,
    pub mode: Mode,
    #[serde(default)]
    pub delay_realization: DelayRealization,
}

impl ModelParams {
    /// Unit interval, `μ(s) = e^{−2s}`, `τ = 1`, `θ = 2`.
    pub fn worked_example(k: f64, mode: Mode) -> Self {
        Self {
            length: 1.0,
            tau: 1.0,
            k,
            theta: 2.0,
            kernel: MemoryKernel::worked_example(),
            mode,
            delay_realization: DelayRealization::RingBuffer,
        }
    }

    /// `θ|k|e^τ` at the given delay.
    pub fn damping_at(&self, tau: f64) -> f64 {
        self.theta * self.k.abs() * tau.exp()
    }
}

/// Resolution choices; turned into a [`Discretization`] by [`Discretization::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub cfl: f64,
    pub ns: usize,
    pub tail_tol: f64,
    pub n_rho: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 200,
            cfl: 0.25,
            ns: 64,
            tail_tol: crate::kernel::DEFAULT_TAIL_TOL,
            n_rho: 32,
        }
    }
}

impl GridSpec {
    pub fn with_nx(self, nx: usize) -> Self {
        Self { nx, ..self }
    }

    pub fn with_ns(self, ns: usize) -> Self {
        Self { ns, ..self }
    }
}

#[derive(Debug, Clone)]
pub struct Discretization {
    pub length: f64,
    pub nx: usize,
    pub dx: f64,
    pub dt: f64,
    pub cfl: f64,
    /// `round(τ/dt)`.
    pub n_delay: usize,
    /// `n_delay · dt`; every report uses this value of the delay.
    pub tau: f64,
    pub n_rho: usize,
    pub kernel: KernelReport,
    /// `None` when the kernel is empty.
    pub history: Option<HistoryGrid>,
    pub realization: DelayRealization,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("cfl = {0} outside (0, 0.5]")]
    CflViolation(f64),
    #[error("delay tau = {tau} is positive but shorter than one time step dt = {dt}")]
    DelayUnresolvable { tau: f64, dt: f64 },
    #[error("non-finite field after step {step}")]
    NonFinite { step: u64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Discretization {
    pub fn new(params: &ModelParams, spec: &GridSpec) -> Result<Self, SolverError> {
        let invalid = |s: &str| Err(SolverError::InvalidParameter(s.to_string()));
        if !(params.length.is_finite() && params.length > 0.0) {
            return invalid("length must be positive");
        }
        if !(params.tau.is_finite() && params.tau >= 0.0) {
            return invalid("tau must be finite and non-negative");
        }
        if !params.k.is_finite() || !params.theta.is_finite() {
            return invalid("k and theta must be finite");
        }
        if spec.nx < 2 {
            return invalid("nx must be at least 2");
        }
        if !(spec.cfl > 0.0 && spec.cfl <= 0.5) {
            return Err(SolverError::CflViolation(spec.cfl));
        }
        let kernel = validate_kernel(&params.kernel, spec.tail_tol)?;
        let dx = params.length / (spec.nx + 1) as f64;
        let dt = spec.cfl * dx;
        if params.tau > 0.0 && params.tau < dt {
            return Err(SolverError::DelayUnresolvable { tau: params.tau, dt });
        }
        let n_delay = (params.tau / dt).round() as usize;
        let history = if params.kernel.is_empty() {
            None
        } else {
            if spec.ns < 2 {
                return invalid("ns must be at least 2");
            }
            Some(HistoryGrid::new(&params.kernel, geometric_nodes(spec.ns, dx, kernel.s_max)))
        };
        let n_rho = match params.delay_realization {
            DelayRealization::RhoGrid if n_delay > 0 => {
                if spec.n_rho < 1 {
                    return invalid("n_rho must be at least 1");
                }
                spec.n_rho
            }
            _ => 0,
        };
        Ok(Self {
            length: params.length,
            nx: spec.nx,
            dx,
            dt,
            cfl: spec.cfl,
            n_delay,
            tau: n_delay as f64 * dt,
            n_rho,
            kernel,
            history,
            realization: params.delay_realization,
        })
    }

    pub fn layout(&self) -> Layout {
        Layout {
            nx: self.nx,
            ns: self.history.as_ref().map_or(0, HistoryGrid::len),
            n_rho: self.n_rho,
        }
    }

    /// Grid coordinate of node `i`, `0 ≤ i ≤ nx + 1`.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    fn uses_ring(&self) -> bool {
        self.n_delay > 0 && self.realization == DelayRealization::RingBuffer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `sin(mπx/L)`
    Sine { m: u32 },
    /// `exp(−((x − center)/width)²)`
    Gaussian { center: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistoryProfile {
    /// `u(x, t) = φ(x)` for `t ≤ 0`.
    #[default]
    Frozen,
    /// `u(x, t) = φ(x) cos(ωt)` for `t ≤ 0`.
    Modulated { omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub shape: Shape,
    #[serde(default = "unit")]
    pub amplitude: f64,
    #[serde(default)]
    pub history: HistoryProfile,
}

fn unit() -> f64 {
    1.0
}

impl InitialData {
    pub fn sine(m: u32) -> Self {
        Self {
            shape: Shape::Sine { m },
            amplitude: 1.0,
            history: HistoryProfile::Frozen,
        }
    }

    pub fn with_amplitude(self, amplitude: f64) -> Self {
        Self { amplitude, ..self }
    }

    pub fn with_history(self, history: HistoryProfile) -> Self {
        Self { history, ..self }
    }

    /// `φ(x)`
    pub fn profile(&self, x: f64, length: f64) -> f64 {
        let shape = match self.shape {
            Shape::Sine { m } => (m as f64 * PI * x / length).sin(),
            Shape::Gaussian { center, width } => (-((x - center) / width).powi(2)).exp(),
        };
        self.amplitude * shape
    }

    /// `u₀(x, 0) − u₀(x, −s) = φ(x)(1 − cos ωs)` as a multiple of `φ`.
    fn history_gap(&self, s: f64) -> f64 {
        match self.history {
            HistoryProfile::Frozen => 0.0,
            HistoryProfile::Modulated { omega } => 1.0 - (omega * s).cos(),
        }
    }

    /// `∂ₜu₀(x, −s) = ωφ(x) sin(ωs)` as a multiple of `φ`.
    fn past_velocity(&self, s: f64) -> f64 {
        match self.history {
            HistoryProfile::Frozen => 0.0,
            HistoryProfile::Modulated { omega } => omega * (omega * s).sin(),
        }
    }
}

/// Where the delayed velocity comes from during a stage evaluation.
enum Delayed<'a> {
    /// `τ = 0`: the stage velocity itself.
    Current,
    /// Last node of the transported `z`.
    Transported,
    /// Interpolated from the ring buffer.
    Buffered(&'a [f64]),
}

struct Workspace {
    stages: [Vec<f64>; 4],
    trial: Vec<f64>,
    memory: Vec<f64>,
    delayed: Vec<f64>,
}

/// A validated problem with its operators and scratch space.
pub struct Solver {
    params: ModelParams,
    disc: Discretization,
    elastic: f64,
    damping: f64,
    work: Workspace,
}

impl Solver {
    pub fn new(params: ModelParams, disc: Discretization) -> Self {
        let len = disc.layout().len();
        let nx = disc.nx;
        let elastic = 1.0 - disc.kernel.mu_tilde;
        let damping = match params.mode {
            Mode::Original => 0.0,
            Mode::Auxiliary => params.damping_at(disc.tau),
        };
        Self {
            params,
            elastic,
            damping,
            work: Workspace {
                stages: std::array::from_fn(|_| vec![0.0; len]),
                trial: vec![0.0; len],
                memory: vec![0.0; nx + 2],
                delayed: vec![0.0; nx],
            },
            disc,
        }
    }

    pub fn from_spec(params: ModelParams, spec: &GridSpec) -> Result<Self, SolverError> {
        let disc = Discretization::new(&params, spec)?;
        Ok(Self::new(params, disc))
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    /// State at `t = 0` with the prescribed past.
    pub fn build(&self, init: &InitialData) -> SimState {
        build(&self.params, init, &self.disc)
    }

    /// Advances one RK4 step.
    pub fn step(&mut self, state: &mut SimState) -> Result<(), SolverError> {
        let dt = self.disc.dt;
        let len = state.y.len();
        let Workspace { stages, trial, memory, delayed } = &mut self.work;
        let [k1, k2, k3, k4] = stages;
        let ring = self.disc.uses_ring().then(|| state.delay_line.as_ref().expect("ring buffer present"));
        let ctx = Rhs {
            disc: &self.disc,
            k: self.params.k,
            elastic: self.elastic,
            damping: self.damping,
        };

        let mut stage = |frac: f64, input: &[f64], out: &mut [f64], delayed: &mut Vec<f64>| {
            let source = match ring {
                Some(line) => {
                    line.interpolate(frac, delayed);
                    Delayed::Buffered(delayed)
                }
                None if self.disc.n_delay > 0 => Delayed::Transported,
                None => Delayed::Current,
            };
            ctx.eval(input, source, out, memory);
        };

        stage(0.0, &state.y, k1, delayed);
        for i in 0..len {
            trial[i] = state.y[i] + 0.5 * dt * k1[i];
        }
        stage(0.5, trial, k2, delayed);
        for i in 0..len {
            trial[i] = state.y[i] + 0.5 * dt * k2[i];
        }
        stage(0.5, trial, k3, delayed);
        for i in 0..len {
            trial[i] = state.y[i] + dt * k3[i];
        }
        stage(1.0, trial, k4, delayed);
        let w = dt / 6.0;
        let mut sum = 0.0;
        for i in 0..len {
            state.y[i] += w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
            sum += state.y[i];
        }

        state.step += 1;
        state.t = state.step as f64 * dt;
        if let Some(line) = state.delay_line.as_mut() {
            let nx = self.disc.nx;
            let v = &state.y[nx + 3..2 * nx + 3];
            line.push(v);
        }
        if !sum.is_finite() {
            return Err(SolverError::NonFinite { step: state.step });
        }
        Ok(())
    }

    /// Evaluates the semi-discrete right-hand side with `τ`-transport taken
    /// from `z` (rho grid) or the stage velocity; used by the spot check.
    pub fn apply_generator(&mut self, y: &[f64], out: &mut [f64]) {
        let ctx = Rhs {
            disc: &self.disc,
            k: self.params.k,
            elastic: self.elastic,
            damping: self.damping,
        };
        let source = if self.disc.n_rho > 0 { Delayed::Transported } else { Delayed::Current };
        ctx.eval(y, source, out, &mut self.work.memory);
    }
}

struct Rhs<'a> {
    disc: &'a Discretization,
    k: f64,
    elastic: f64,
    damping: f64,
}

impl Rhs<'_> {
    fn eval(&self, y: &[f64], source: Delayed<'_>, out: &mut [f64], memory: &mut [f64]) {
        let layout = self.disc.layout();
        let nx = layout.nx;
        let inv_dx2 = 1.0 / (self.disc.dx * self.disc.dx);
        let (u, rest) = y.split_at(nx + 2);
        let (v, rest) = rest.split_at(nx + 2);
        let (eta, z) = rest.split_at(layout.ns * nx);
        let (du, rest_out) = out.split_at_mut(nx + 2);
        let (dv, rest_out) = rest_out.split_at_mut(nx + 2);
        let (deta, dz) = rest_out.split_at_mut(layout.ns * nx);

        du.copy_from_slice(v);
        du[0] = 0.0;
        du[nx + 1] = 0.0;

        memory.fill(0.0);
        if let Some(grid) = &self.disc.history {
            let w = grid.weights();
            for (j, row) in eta.chunks_exact(nx).enumerate().skip(1) {
                let wj = w[j];
                for (m, e) in memory[1..=nx].iter_mut().zip(row) {
                    *m += wj * e;
                }
            }
        }

        let delayed: &[f64] = match source {
            Delayed::Current => &v[1..=nx],
            Delayed::Transported => &z[(layout.n_rho - 1) * nx..],
            Delayed::Buffered(buf) => buf,
        };

        dv[0] = 0.0;
        dv[nx + 1] = 0.0;
        for i in 1..=nx {
            let lap_u = (u[i - 1] - 2.0 * u[i] + u[i + 1]) * inv_dx2;
            let lap_m = (memory[i - 1] - 2.0 * memory[i] + memory[i + 1]) * inv_dx2;
            dv[i] = self.elastic * lap_u + lap_m - self.k * delayed[i - 1] - self.damping * v[i];
        }

        if let Some(grid) = &self.disc.history {
            let w = grid.weights();
            let kt = grid.transport();
            let free = grid.len() - 1;
            let v_in = &v[1..=nx];
            deta[..nx].fill(0.0);
            let eta_free = &eta[nx..];
            let out_free = &mut deta[nx..];
            for r in 0..free {
                let row = &mut out_free[r * nx..(r + 1) * nx];
                let wj = w[r + 1];
                let d = kt.diag[r];
                let cur = &eta_free[r * nx..(r + 1) * nx];
                for i in 0..nx {
                    row[i] = wj * v_in[i] - d * cur[i];
                }
                if r > 0 {
                    let l = kt.lower[r - 1];
                    let prev = &eta_free[(r - 1) * nx..r * nx];
                    for i in 0..nx {
                        row[i] -= l * prev[i];
                    }
                }
                if r + 1 < free {
                    let up = kt.upper[r];
                    let next = &eta_free[(r + 1) * nx..(r + 2) * nx];
                    for i in 0..nx {
                        row[i] -= up * next[i];
                    }
                }
            }
            grid.mass_lu().solve_columns(out_free, nx);
        }

        if layout.n_rho > 0 {
            let rate = layout.n_rho as f64 / self.disc.tau;
            let mut upstream: &[f64] = &v[1..=nx];
            for (j, row) in dz.chunks_exact_mut(nx).enumerate() {
                let cur = &z[j * nx..(j + 1) * nx];
                for i in 0..nx {
                    row[i] = -rate * (cur[i] - upstream[i]);
                }
                upstream = cur;
            }
        }
    }
}

/// State at `t = 0`: `u = φ`, `v = ∂ₜu₀(0) = 0`, and `η`, delay history from
/// the prescribed past `u₀(x, t), t ≤ 0`.
pub fn build(params: &ModelParams, init: &InitialData, disc: &Discretization) -> SimState {
    let layout = disc.layout();
    let nx = layout.nx;
    let mut y = vec![0.0; layout.len()];
    let phi: Vec<f64> = (1..=nx).map(|i| init.profile(disc.x(i), params.length)).collect();
    y[1..=nx].copy_from_slice(&phi);

    if let Some(grid) = &disc.history {
        let eta = &mut y[layout.eta_range()];
        for (j, &s) in grid.nodes().iter().enumerate().skip(1) {
            let gap = init.history_gap(s);
            for (e, p) in eta[j * nx..(j + 1) * nx].iter_mut().zip(&phi) {
                *e = gap * p;
            }
        }
    }
    if layout.n_rho > 0 {
        let z = &mut y[layout.z_range()];
        let drho = 1.0 / layout.n_rho as f64;
        for j in 0..layout.n_rho {
            let past = init.past_velocity(disc.tau * (j + 1) as f64 * drho);
            for (e, p) in z[j * nx..(j + 1) * nx].iter_mut().zip(&phi) {
                *e = past * p;
            }
        }
    }
    let delay_line = disc.uses_ring().then(|| {
        let mut line = DelayLine::new(nx, disc.n_delay);
        let mut field = vec![0.0; nx];
        for lag in (0..=disc.n_delay).rev() {
            let past = init.past_velocity(lag as f64 * disc.dt);
            for (f, p) in field.iter_mut().zip(&phi) {
                *f = past * p;
            }
            line.push(&field);
        }
        line
    });
    SimState {
        t: 0.0,
        step: 0,
        layout,
        y,
        delay_line,
    }
}
