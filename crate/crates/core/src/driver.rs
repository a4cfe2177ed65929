//! Generic time loop shared by full and reduced solvers.

use crate::error::{Error, Result};

/// Anything that can be advanced in time with an explicit step size.
pub trait Stepper {
    type State: Clone;

    /// Stable step size for the given state.
    fn dt(&mut self, state: &Self::State) -> Result<f64>;

    /// Advances `state` from `t` by `dt`; `step` is the index of this step.
    fn step(&mut self, state: &Self::State, t: f64, dt: f64, step: usize) -> Result<Self::State>;
}

/// How step sizes are chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DtPolicy {
    /// Recompute from the CFL condition every step.
    Adaptive,
    /// Use this value every step (still clipped to sample times).
    Fixed(f64),
}

/// Outcome of [`integrate`].
#[derive(Clone, Debug)]
pub struct Integration<S> {
    pub state: S,
    pub t: f64,
    pub steps: usize,
}

/// Advances from `t0` to `t_end`, clipping steps so every time in `samples`
/// (sorted, within `[t0, t_end]`) is hit exactly, and calling `observe` there.
pub fn integrate<M: Stepper>(
    model: &mut M,
    state0: M::State,
    t0: f64,
    t_end: f64,
    samples: &[f64],
    policy: DtPolicy,
    mut observe: impl FnMut(usize, f64, &M::State) -> Result<()>,
) -> Result<Integration<M::State>> {
    if !(t_end >= t0) {
        return Err(Error::arg(format!("final time {t_end} before start {t0}")));
    }
    let mut state = state0;
    let mut t = t0;
    let mut steps = 0usize;
    let mut next = 0usize;
    let tol = 1e-12 * t_end.abs().max(1.0);
    while next < samples.len() && samples[next] <= t + tol {
        observe(next, t, &state)?;
        next += 1;
    }
    while t < t_end - tol {
        let mut dt = match policy {
            DtPolicy::Adaptive => model.dt(&state)?,
            DtPolicy::Fixed(dt) => dt,
        };
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Aborted { step: steps, t, reason: format!("invalid time step {dt}") });
        }
        let target = if next < samples.len() { samples[next].min(t_end) } else { t_end };
        let mut landed = false;
        if t + dt >= target - tol {
            dt = target - t;
            landed = true;
        }
        state = model.step(&state, t, dt, steps)?;
        steps += 1;
        t = if landed { target } else { t + dt };
        while next < samples.len() && samples[next] <= t + tol {
            observe(next, t, &state)?;
            next += 1;
        }
    }
    Ok(Integration { state, t, steps })
}

/// `n` uniformly spaced instants covering `[0, t_end]` including both ends.
pub fn uniform_times(t_end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![t_end],
        _ if t_end == 0.0 => vec![0.0],
        _ => (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Fails with an abort if any entry is not finite.
pub fn check_finite(v: &[f64], step: usize, t: f64, what: &str) -> Result<()> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::Aborted { step, t, reason: format!("non-finite {what} at node {i}") });
    }
    Ok(())
}
