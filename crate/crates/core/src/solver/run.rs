use serde::{Deserialize, Serialize};

use super::{Discretization, InitialData, Mode, ModelParams, SimState, Solver, SolverError};
use crate::energy::{energy, probes, EnergyBreakdown, Probes};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub energy: EnergyBreakdown,
    pub probes: Probes,
}

/// Volumetric fields at one time, kept for identity checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Full history rows, `eta[j * nx + i]`, including the inflow row.
    pub eta: Vec<f64>,
    pub v_delayed: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotOptions {
    /// Steps between snapshots.
    pub every: usize,
    /// Only snapshots with `t` in this window are kept.
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub horizon: f64,
    /// Steps between energy samples.
    pub sample_every: usize,
    pub snapshots: Option<SnapshotOptions>,
}

impl RunOptions {
    pub fn new(horizon: f64, sample_every: usize) -> Self {
        Self {
            horizon,
            sample_every,
            snapshots: None,
        }
    }

    pub fn with_snapshots(self, every: usize, window: (f64, f64)) -> Self {
        Self {
            snapshots: Some(SnapshotOptions { every, window }),
            ..self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub mode: Mode,
    pub k: f64,
    pub theta: f64,
    /// Snapped delay.
    pub tau: f64,
    pub dt: f64,
    pub dx: f64,
    pub nx: usize,
    pub samples: Vec<Sample>,
    pub snapshots: Vec<Snapshot>,
}

impl Trace {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.energy.total).collect()
    }
}

/// A failed run together with everything recorded before the failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{error}")]
pub struct RunError {
    pub error: SolverError,
    pub partial: Box<Trace>,
}

impl Solver {
    pub fn sample(&self, state: &SimState) -> Sample {
        Sample {
            t: state.t,
            energy: energy(state, &self.params, &self.disc),
            probes: probes(state, &self.disc),
        }
    }

    fn snapshot(&self, state: &SimState) -> Snapshot {
        Snapshot {
            t: state.t,
            u: state.u().to_vec(),
            v: state.v().to_vec(),
            eta: state.eta().to_vec(),
            v_delayed: state.delayed_velocity().to_vec(),
        }
    }

    /// Integrates `state` up to the horizon (rounded to whole steps).
    pub fn run(&mut self, mut state: SimState, options: &RunOptions) -> Result<(Trace, SimState), RunError> {
        let steps = (options.horizon / self.disc.dt).round() as u64;
        let every = options.sample_every.max(1) as u64;
        let mut trace = Trace {
            mode: self.params.mode,
            k: self.params.k,
            theta: self.params.theta,
            tau: self.disc.tau,
            dt: self.disc.dt,
            dx: self.disc.dx,
            nx: self.disc.nx,
            samples: vec![self.sample(&state)],
            snapshots: Vec::new(),
        };
        let keep_snapshot = |t: f64, step: u64| {
            options.snapshots.is_some_and(|o| {
                step.is_multiple_of(o.every.max(1) as u64) && t >= o.window.0 - 1e-12 && t <= o.window.1 + 1e-12
            })
        };
        if keep_snapshot(state.t, 0) {
            trace.snapshots.push(self.snapshot(&state));
        }
        for n in 1..=steps {
            if let Err(error) = self.step(&mut state) {
                return Err(RunError { error, partial: Box::new(trace) });
            }
            if n % every == 0 || n == steps {
                trace.samples.push(self.sample(&state));
            }
            if keep_snapshot(state.t, n) {
                trace.snapshots.push(self.snapshot(&state));
            }
        }
        Ok((trace, state))
    }
}

/// Builds the initial state and integrates it.
pub fn run(
    params: &ModelParams,
    init: &InitialData,
    disc: &Discretization,
    options: &RunOptions,
) -> Result<Trace, RunError> {
    let mut solver = Solver::new(params.clone(), disc.clone());
    let state = solver.build(init);
    solver.run(state, options).map(|(trace, _)| trace)
}
