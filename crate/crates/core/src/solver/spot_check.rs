use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DelayRealization, Discretization, ModelParams, Solver};
use crate::energy::edge_bilinear;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotCheckReport {
    /// Largest `⟨AU, U⟩ / ‖U‖²` over the trials.
    pub max_quotient: f64,
    pub c_shift: f64,
    pub pass: bool,
}

/// Default number of ρ nodes when the caller's discretization stores the
/// delay in a ring buffer.
const SPOT_CHECK_RHO_NODES: usize = 32;

/// Energy inner product, `2F(U) = ⟨U, U⟩`.
pub fn energy_inner(solver: &Solver, x: &[f64], y: &[f64]) -> f64 {
    let disc = &solver.disc;
    let layout = disc.layout();
    let nx = layout.nx;
    let dx = disc.dx;
    let (ux, uy) = (&x[layout.u_range()], &y[layout.u_range()]);
    let elastic: f64 = ux.windows(2).zip(uy.windows(2)).map(|(a, b)| (a[1] - a[0]) * (b[1] - b[0])).sum::<f64>()
        / dx
        * (1.0 - disc.kernel.mu_tilde);
    let (vx, vy) = (&x[layout.v_range()][1..=nx], &y[layout.v_range()][1..=nx]);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>() * dx;
    let mut acc = elastic + dot(vx, vy);
    if let Some(grid) = &disc.history {
        let ex = &x[layout.eta_range()][nx..];
        let ey = &y[layout.eta_range()][nx..];
        acc += edge_bilinear(grid.mass(), ex, ey, nx, dx);
    }
    let coupling = solver.params.damping_at(disc.tau);
    if layout.n_rho > 0 && coupling > 0.0 {
        let n = layout.n_rho;
        let drho = 1.0 / n as f64;
        let scale = coupling * disc.tau * drho;
        let (zx, zy) = (&x[layout.z_range()], &y[layout.z_range()]);
        acc += 0.5 * scale * dot(vx, vy);
        for j in 1..=n {
            let w = if j == n { 0.5 } else { 1.0 } * (-disc.tau * j as f64 * drho).exp();
            acc += scale * w * dot(&zx[(j - 1) * nx..j * nx], &zy[(j - 1) * nx..j * nx]);
        }
    }
    acc
}

/// Largest Rayleigh quotient `⟨AU, U⟩/‖U‖²` of the semi-discrete generator
/// over random states, in the energy inner product.
///
/// A positive delay is always represented on a ρ grid here so that the delay
/// history is part of the state `U`.
pub fn dissipativity_spot_check(
    params: &ModelParams,
    disc: &Discretization,
    trials: usize,
    c_shift: f64,
    seed: u64,
) -> SpotCheckReport {
    let mut disc = disc.clone();
    if disc.n_delay > 0 {
        disc.realization = DelayRealization::RhoGrid;
        if disc.n_rho == 0 {
            disc.n_rho = SPOT_CHECK_RHO_NODES;
        }
    }
    let layout = disc.layout();
    let mut solver = Solver::new(params.clone(), disc);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = vec![0.0; layout.len()];
    let mut image = vec![0.0; layout.len()];
    let nx = layout.nx;
    let mut max_quotient = f64::NEG_INFINITY;
    for _ in 0..trials.max(1) {
        state.fill(0.0);
        for r in [layout.u_range(), layout.v_range()] {
            for x in &mut state[r.start + 1..r.end - 1] {
                *x = rng.random_range(-1.0..1.0);
            }
        }
        let eta = layout.eta_range();
        for x in &mut state[(eta.start + nx).min(eta.end)..eta.end] {
            *x = rng.random_range(-1.0..1.0);
        }
        for x in &mut state[layout.z_range()] {
            *x = rng.random_range(-1.0..1.0);
        }
        let norm = energy_inner(&solver, &state, &state).sqrt();
        state.iter_mut().for_each(|x| *x /= norm);
        solver.apply_generator(&state, &mut image);
        let q = energy_inner(&solver, &image, &state);
        max_quotient = max_quotient.max(q);
    }
    SpotCheckReport {
        max_quotient,
        c_shift,
        pass: max_quotient <= c_shift,
    }
}
