//! Strang-split time integration of `u_t = u_xx + f(u)` on an expanding grid.
//!
//! One step of size `dt` is: half a reaction step (RK4, pointwise), a full
//! Crank–Nicolson diffusion step (tridiagonal solve), and another half
//! reaction step. The left end is a homogeneous Neumann boundary handled
//! with a mirrored ghost node; the right end is pinned to the far-field
//! state, i.e. the solution of the reaction ODE started from `u0(x_N)`.

mod convergence;

pub use convergence::{
    convergence_order, heat_kernel_error, uniform_logistic_error, ConvergenceProblem,
    ConvergenceReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridSpec};
use crate::nonlinearity::Reaction;
use crate::ode::rk4_step;
use crate::profiles::InitialProfile;
use crate::tridiag;

pub const RANGE_TOLERANCE: f64 = 1e-14;
pub const MONOTONE_TOLERANCE: f64 = 1e-10;

/// Value of the far-field state `U(t; x)` imposed at the right end.
pub trait FarField: Send + Sync {
    fn value(&self, t: f64, x: f64) -> f64;
}

impl<F> FarField for F
where
    F: Fn(f64, f64) -> f64 + Send + Sync,
{
    fn value(&self, t: f64, x: f64) -> f64 {
        self(t, x)
    }
}

/// `U(t; x)` solving `dU/dt = f(U)`, `U(0) = u0(x)`.
pub fn right_boundary_value(p: &InitialProfile, reaction: &dyn Reaction, t: f64, x: f64) -> f64 {
    reaction.flow(p.value(x), t)
}

/// The reaction-ODE far field of a profile.
pub struct OdeFarField<'a> {
    pub profile: &'a InitialProfile,
    pub reaction: &'a dyn Reaction,
}

impl FarField for OdeFarField<'_> {
    fn value(&self, t: f64, x: f64) -> f64 {
        right_boundary_value(self.profile, self.reaction, t, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum TimeStep {
    Fixed {
        dt: f64,
    },
    /// Step doubling with a target local error per step.
    Adaptive {
        #[serde(default = "default_tolerance")]
        tolerance: f64,
        #[serde(default = "default_dt_min")]
        dt_min: f64,
        #[serde(default = "default_dt_init")]
        dt_init: f64,
    },
}

fn default_tolerance() -> f64 {
    1e-7
}

fn default_dt_min() -> f64 {
    1e-6
}

fn default_dt_init() -> f64 {
    1e-3
}

impl Default for TimeStep {
    fn default() -> Self {
        TimeStep::Adaptive {
            tolerance: default_tolerance(),
            dt_min: default_dt_min(),
            dt_init: default_dt_init(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid: GridSpec,
    #[serde(default)]
    pub time_step: TimeStep,
    #[serde(default = "default_observation_interval")]
    pub observation_interval: f64,
    /// Expand once the tracked crossing passes `x_left + (1 - margin) (x_N - x_left)`.
    #[serde(default = "default_margin")]
    pub expansion_margin: f64,
    /// Each expansion multiplies the domain length by this factor.
    #[serde(default = "default_expansion_factor")]
    pub expansion_factor: f64,
    /// Levels whose rightmost crossing drives expansion; the smallest one is used.
    #[serde(default)]
    pub tracked_levels: Vec<f64>,
    #[serde(default = "default_true")]
    pub check_monotone: bool,
    /// Grow the domain to the right as the front advances.
    #[serde(default = "default_true")]
    pub expand: bool,
    /// Nodes within this distance of `u[0]` count as plateau when coarsening.
    #[serde(default = "default_flat_tolerance")]
    pub flat_tolerance: f64,
}

fn default_observation_interval() -> f64 {
    0.5
}

fn default_margin() -> f64 {
    0.2
}

fn default_expansion_factor() -> f64 {
    2.0
}

fn default_true() -> bool {
    true
}

fn default_flat_tolerance() -> f64 {
    1e-9
}

impl SolverConfig {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            time_step: TimeStep::default(),
            observation_interval: default_observation_interval(),
            expansion_margin: default_margin(),
            expansion_factor: default_expansion_factor(),
            tracked_levels: Vec::new(),
            check_monotone: true,
            expand: true,
            flat_tolerance: default_flat_tolerance(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.observation_interval > 0.0 && self.observation_interval.is_finite()) {
            return Err(Error::param("observation_interval", "must be positive"));
        }
        match self.time_step {
            TimeStep::Fixed { dt } => {
                if !(dt > 0.0 && dt <= self.observation_interval) {
                    return Err(Error::param("dt", "must lie in (0, observation_interval]"));
                }
            }
            TimeStep::Adaptive {
                tolerance,
                dt_min,
                dt_init,
            } => {
                if !(tolerance > 0.0 && dt_min > 0.0 && dt_init >= dt_min) {
                    return Err(Error::param(
                        "time_step",
                        "adaptive policy needs tolerance > 0 and 0 < dt_min <= dt_init",
                    ));
                }
                if dt_min > self.observation_interval {
                    return Err(Error::param("dt_min", "exceeds observation_interval"));
                }
            }
        }
        if !(self.expansion_margin > 0.0 && self.expansion_margin < 1.0) {
            return Err(Error::param("expansion_margin", "must lie in (0, 1)"));
        }
        if !(self.expansion_factor > 1.0) {
            return Err(Error::param("expansion_factor", "must exceed 1"));
        }
        if self.tracked_levels.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
            return Err(Error::param("tracked_levels", "levels must lie in (0, 1)"));
        }
        if self.grid.n + 1 > self.grid.node_budget {
            return Err(Error::param("node_budget", "smaller than the initial grid"));
        }
        Ok(())
    }

    fn expansion_level(&self) -> f64 {
        if self.tracked_levels.is_empty() {
            0.5
        } else {
            self.tracked_levels.iter().cloned().fold(1.0, f64::min)
        }
    }
}

/// A change of the right end of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEvent {
    pub t: f64,
    pub x_right_before: f64,
    pub x_right_after: f64,
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub coarsening_passes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub steps: usize,
    pub rejected: usize,
    /// Steps accepted at `dt_min` despite exceeding the error target.
    pub forced: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub dt_last: f64,
    pub expansions: Vec<GridEvent>,
    pub invariant_checks: usize,
}

impl Default for StepStats {
    fn default() -> Self {
        Self {
            steps: 0,
            rejected: 0,
            forced: 0,
            dt_min: f64::INFINITY,
            dt_max: 0.0,
            dt_last: 0.0,
            expansions: Vec::new(),
            invariant_checks: 0,
        }
    }
}

impl StepStats {
    fn record(&mut self, dt: f64) {
        self.steps += 1;
        self.dt_min = self.dt_min.min(dt);
        self.dt_max = self.dt_max.max(dt);
        self.dt_last = dt;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyState {
    pub t: f64,
    pub grid: Grid,
    pub u: Vec<f64>,
    /// `U(t; x_N)`, the value imposed at the right end.
    pub right_farfield: f64,
    pub stats: StepStats,
    dt_next: f64,
}

impl CauchyState {
    pub fn new(grid: Grid, u: Vec<f64>) -> Result<Self> {
        if grid.len() != u.len() || grid.len() < 3 {
            return Err(Error::Grid(format!(
                "{} values for {} nodes",
                u.len(),
                grid.len()
            )));
        }
        let right = u[u.len() - 1];
        Ok(Self {
            t: 0.0,
            grid,
            u,
            right_farfield: right,
            stats: StepStats::default(),
            dt_next: 0.0,
        })
    }

    /// State at `t = 0` holding `u0` on the configured grid.
    pub fn initial(p: &InitialProfile, grid: Grid) -> Result<Self> {
        let u = grid.nodes().iter().map(|&x| p.value(x)).collect();
        Self::new(grid, u)
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    /// Abort with a diagnostic if `u` leaves `[0, 1]` or increases in `x`.
    pub fn check_invariants(&mut self, check_monotone: bool) -> Result<()> {
        self.stats.invariant_checks += 1;
        let x = self.grid.nodes();
        for (i, &v) in self.u.iter().enumerate() {
            if !(-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(&v) {
                return Err(Error::InvariantViolation {
                    kind: "range",
                    t: self.t,
                    node: i,
                    x: x[i],
                    value: v,
                });
            }
        }
        if check_monotone {
            for i in 0..self.u.len() - 1 {
                let rise = self.u[i + 1] - self.u[i];
                if rise > MONOTONE_TOLERANCE {
                    return Err(Error::InvariantViolation {
                        kind: "monotone",
                        t: self.t,
                        node: i + 1,
                        x: x[i + 1],
                        value: rise,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Reusable buffers for the diffusion solve.
#[derive(Default)]
struct Workspace {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

/// Pointwise RK4 reaction substep. The exact reaction flow keeps `[0, 1]`
/// invariant, so round-off excursions outside it are projected back.
fn react(reaction: &dyn Reaction, u: &mut [f64], h: f64) {
    let n = u.len();
    for v in &mut u[..n - 1] {
        let inside = (0.0..=1.0).contains(v);
        let next = rk4_step(|s| reaction.rate(s), *v, h);
        *v = if inside { next.clamp(0.0, 1.0) } else { next };
    }
}

/// One Strang step of size `dt` from time `t`, in place.
fn strang(
    grid: &Grid,
    u: &mut [f64],
    t: f64,
    dt: f64,
    reaction: &dyn Reaction,
    far: &dyn FarField,
    ws: &mut Workspace,
) {
    let n = u.len();
    let x = grid.nodes();
    let x_right = x[n - 1];
    let half = 0.5 * dt;
    react(reaction, u, half);
    // the right end is held at the mid-step far-field value during diffusion
    let ub = far.value(t + half, x_right);
    u[n - 1] = ub;

    // Crank–Nicolson in increment form, (I - dt/2 L) d = dt L u, with L
    // applied through neighbour differences so flat data gives d = 0 exactly.
    let m = n - 1;
    for buf in [
        &mut ws.lower,
        &mut ws.diag,
        &mut ws.upper,
        &mut ws.rhs,
        &mut ws.scratch,
    ] {
        buf.clear();
        buf.resize(m, 0.0);
    }
    // mirrored ghost node: u_xx(x_0) = 2 (u_1 - u_0) / h0^2
    let h0 = x[1] - x[0];
    let w = 2.0 / (h0 * h0);
    ws.diag[0] = 1.0 + half * w;
    ws.upper[0] = -half * w;
    ws.rhs[0] = dt * w * (u[1] - u[0]);
    for i in 1..m {
        let (a, b, c) = grid.laplacian_weights(i);
        ws.lower[i] = -half * a;
        ws.diag[i] = 1.0 - half * b;
        ws.upper[i] = -half * c;
        ws.rhs[i] = dt * (a * (u[i - 1] - u[i]) + c * (u[i + 1] - u[i]));
    }
    ws.upper[m - 1] = 0.0;
    tridiag::solve(&ws.lower, &ws.diag, &ws.upper, &mut ws.rhs, &mut ws.scratch);
    for (v, d) in u[..m].iter_mut().zip(&ws.rhs) {
        *v += d;
    }

    react(reaction, u, half);
    u[n - 1] = far.value(t + dt, x_right);
}

/// Advance `state` by exactly `dt` with one Strang step and re-check invariants.
pub fn step(
    state: &mut CauchyState,
    dt: f64,
    reaction: &dyn Reaction,
    far: &dyn FarField,
    check_monotone: bool,
) -> Result<()> {
    let mut ws = Workspace::default();
    strang(
        &state.grid,
        &mut state.u,
        state.t,
        dt,
        reaction,
        far,
        &mut ws,
    );
    state.t += dt;
    state.right_farfield = state.u[state.u.len() - 1];
    state.stats.record(dt);
    state.check_invariants(check_monotone)
}

/// Rightmost position where `u` crosses `level`, by linear interpolation.
fn rightmost_crossing(x: &[f64], u: &[f64], level: f64) -> Option<f64> {
    let n = u.len();
    if u[n - 1] >= level {
        return Some(x[n - 1]);
    }
    let j = (0..n - 1).rev().find(|&i| u[i] >= level)?;
    let w = (u[j] - level) / (u[j] - u[j + 1]);
    Some(x[j] + w * (x[j + 1] - x[j]))
}

struct Integrator<'a> {
    reaction: &'a dyn Reaction,
    far: &'a dyn FarField,
    cfg: &'a SolverConfig,
    ws: Workspace,
    trial_a: Vec<f64>,
    trial_b: Vec<f64>,
}

impl<'a> Integrator<'a> {
    fn new(reaction: &'a dyn Reaction, far: &'a dyn FarField, cfg: &'a SolverConfig) -> Self {
        Self {
            reaction,
            far,
            cfg,
            ws: Workspace::default(),
            trial_a: Vec::new(),
            trial_b: Vec::new(),
        }
    }

    fn expand_if_needed(&self, state: &mut CauchyState) -> Result<()> {
        if !self.cfg.expand {
            return Ok(());
        }
        let level = self.cfg.expansion_level();
        for _ in 0..256 {
            let x = state.grid.nodes();
            let (xl, xr) = (x[0], x[x.len() - 1]);
            let trigger = xl + (1.0 - self.cfg.expansion_margin) * (xr - xl);
            match rightmost_crossing(x, &state.u, level) {
                Some(pos) if pos > trigger => {}
                _ => return Ok(()),
            }
            let new_right = xl + self.cfg.expansion_factor * (xr - xl);
            let t = state.t;
            let nodes_before = state.grid.len();
            let (g, u, passes) = state.grid.expand_within_budget(
                &state.u,
                new_right,
                self.cfg.grid.node_budget,
                self.cfg.flat_tolerance,
                |x| self.far.value(t, x),
            )?;
            state.grid = g;
            state.u = u;
            state.right_farfield = state.u[state.u.len() - 1];
            state.stats.expansions.push(GridEvent {
                t,
                x_right_before: xr,
                x_right_after: state.grid.x_right(),
                nodes_before,
                nodes_after: state.grid.len(),
                coarsening_passes: passes,
            });
        }
        Err(Error::Grid(
            "expansion did not catch up with the front".into(),
        ))
    }

    /// Advance to exactly `t_target`.
    fn advance_to(&mut self, state: &mut CauchyState, t_target: f64) -> Result<()> {
        let dt_cap = self.cfg.observation_interval;
        let eps_t = 1e-12 * t_target.abs().max(1.0);
        while t_target - state.t > eps_t {
            let remaining = t_target - state.t;
            match self.cfg.time_step {
                TimeStep::Fixed { dt } => {
                    let h = if dt >= remaining - eps_t {
                        remaining
                    } else {
                        dt
                    };
                    strang(
                        &state.grid,
                        &mut state.u,
                        state.t,
                        h,
                        self.reaction,
                        self.far,
                        &mut self.ws,
                    );
                    state.t = if h == remaining {
                        t_target
                    } else {
                        state.t + h
                    };
                    state.stats.record(h);
                }
                TimeStep::Adaptive {
                    tolerance,
                    dt_min,
                    dt_init,
                } => {
                    if state.dt_next <= 0.0 {
                        state.dt_next = dt_init.min(dt_cap);
                    }
                    let truncated = state.dt_next >= remaining - eps_t;
                    let h = if truncated { remaining } else { state.dt_next };
                    let t0 = state.t;
                    self.trial_a.clone_from(&state.u);
                    self.trial_b.clone_from(&state.u);
                    let (r, f) = (self.reaction, self.far);
                    strang(&state.grid, &mut self.trial_a, t0, h, r, f, &mut self.ws);
                    strang(
                        &state.grid,
                        &mut self.trial_b,
                        t0,
                        0.5 * h,
                        r,
                        f,
                        &mut self.ws,
                    );
                    strang(
                        &state.grid,
                        &mut self.trial_b,
                        t0 + 0.5 * h,
                        0.5 * h,
                        r,
                        f,
                        &mut self.ws,
                    );
                    let err = self
                        .trial_a
                        .iter()
                        .zip(&self.trial_b)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                        / 3.0;
                    if !err.is_finite() {
                        return Err(Error::Integration(format!("non-finite state at t={t0}")));
                    }
                    let at_floor = h <= dt_min * (1.0 + 1e-12);
                    let accept = err <= tolerance || at_floor;
                    if accept {
                        std::mem::swap(&mut state.u, &mut self.trial_b);
                        state.t = if truncated { t_target } else { t0 + h };
                        state.stats.record(h);
                        if err > tolerance {
                            state.stats.forced += 1;
                        }
                    } else {
                        state.stats.rejected += 1;
                    }
                    let factor = if err == 0.0 {
                        2.0
                    } else {
                        (0.9 * (tolerance / err).cbrt()).clamp(0.2, 2.0)
                    };
                    // a step shortened to land on an observation says little about the next one
                    if !(accept && truncated && factor > 1.0) {
                        state.dt_next = (h * factor).clamp(dt_min, dt_cap);
                    }
                    if !accept {
                        continue;
                    }
                }
            }
            state.right_farfield = state.u[state.u.len() - 1];
            state.check_invariants(self.cfg.check_monotone)?;
            self.expand_if_needed(state)?;
        }
        state.t = t_target;
        Ok(())
    }
}

/// Callback invoked at every observation time, including `t = 0`.
pub trait Observer {
    fn observe(&mut self, state: &CauchyState) -> Result<()>;
}

/// Keeps full copies of the observed states.
#[derive(Debug, Clone, Default)]
pub struct SnapshotObserver {
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub nodes: Vec<f64>,
    pub u: Vec<f64>,
}

impl Observer for SnapshotObserver {
    fn observe(&mut self, state: &CauchyState) -> Result<()> {
        self.snapshots.push(Snapshot {
            t: state.t,
            nodes: state.nodes().to_vec(),
            u: state.u.clone(),
        });
        Ok(())
    }
}

/// Cheap per-observation summary kept by every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMeta {
    pub t: f64,
    pub nodes: usize,
    pub x_right: f64,
    /// `u` at the left end, the plateau value.
    pub u_left: f64,
    /// `u` at the right end, the far-field value.
    pub u_right: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub t: f64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub observations: Vec<ObservationMeta>,
    /// Last state reached, even when the run failed.
    pub state: CauchyState,
    pub failure: Option<RunFailure>,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    pub fn into_result(self) -> Result<Self> {
        match &self.failure {
            None => Ok(self),
            Some(f) => Err(Error::Integration(format!(
                "run failed at t={}: {}",
                f.t, f.error
            ))),
        }
    }
}

/// Observation times `k * interval` below `t_end`, then `t_end` itself.
pub fn observation_times(interval: f64, t_end: f64) -> Vec<f64> {
    let mut times = vec![0.0];
    if t_end <= 0.0 {
        return times;
    }
    let mut k = 1u64;
    loop {
        let t = k as f64 * interval;
        if t >= t_end * (1.0 - 1e-12) {
            break;
        }
        times.push(t);
        k += 1;
    }
    times.push(t_end);
    times
}

/// Integrate from `state` to `t_end`, observing every `observation_interval`.
pub fn run_from_state(
    mut state: CauchyState,
    reaction: &dyn Reaction,
    far: &dyn FarField,
    cfg: &SolverConfig,
    t_end: f64,
    observers: &mut [&mut dyn Observer],
) -> Result<RunRecord> {
    cfg.validate()?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::param("t_end", "must be finite and nonnegative"));
    }
    let mut integrator = Integrator::new(reaction, far, cfg);
    let mut observations = Vec::new();
    let mut failure = None;
    let start = state.t;
    let times: Vec<f64> = observation_times(cfg.observation_interval, t_end - start)
        .into_iter()
        .map(|t| t + start)
        .collect();
    let initial = state
        .check_invariants(cfg.check_monotone)
        .and_then(|_| integrator.expand_if_needed(&mut state));
    if let Err(e) = initial {
        return Ok(RunRecord {
            observations,
            failure: Some(RunFailure {
                t: state.t,
                error: e.to_string(),
            }),
            state,
        });
    }
    for (k, &t_obs) in times.iter().enumerate() {
        let result = if k == 0 {
            Ok(())
        } else {
            integrator.advance_to(&mut state, t_obs)
        }
        .and_then(|_| observers.iter_mut().try_for_each(|o| o.observe(&state)));
        if let Err(e) = result {
            failure = Some(RunFailure {
                t: state.t,
                error: e.to_string(),
            });
            break;
        }
        let n = state.u.len();
        observations.push(ObservationMeta {
            t: state.t,
            nodes: n,
            x_right: state.grid.x_right(),
            u_left: state.u[0],
            u_right: state.u[n - 1],
            steps: state.stats.steps,
        });
    }
    Ok(RunRecord {
        observations,
        state,
        failure,
    })
}

/// Solve the Cauchy problem with initial datum `p` on the configured grid.
pub fn run(
    p: &InitialProfile,
    reaction: &dyn Reaction,
    cfg: &SolverConfig,
    t_end: f64,
    observers: &mut [&mut dyn Observer],
) -> Result<RunRecord> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let state = CauchyState::initial(p, grid)?;
    let far = OdeFarField {
        profile: p,
        reaction,
    };
    run_from_state(state, reaction, &far, cfg, t_end, observers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridKind;
    use crate::nonlinearity::{Nonlinearity, PureDiffusion};
    use crate::profiles::Family;
    use std::collections::BTreeMap;

    fn uniform_spec(xl: f64, xr: f64, n: usize) -> GridSpec {
        GridSpec {
            kind: GridKind::Uniform,
            x_left: xl,
            x_right: xr,
            n,
            stretch: 0.0,
            node_budget: 200_000,
        }
    }

    #[test]
    fn boundary_value_examples() {
        let nl = Nonlinearity::logistic(1.0).unwrap();
        let p = InitialProfile::new(
            Family::Algebraic,
            &BTreeMap::from([("alpha".to_string(), 2.0)]),
            0.9,
            None,
            2.0,
        )
        .unwrap();
        let x = 1000.0; // u0 = 1e-6
        let v = right_boundary_value(&p, &nl, 1e6f64.ln(), x);
        assert!((v - 1.0 / (1.0 + 1e-6 * (1e6 - 1.0))).abs() < 1e-12);
        assert!((v - 0.50000025).abs() < 1e-9);
        assert_eq!(right_boundary_value(&p, &nl, 0.0, x), p.value(x));
        assert!((right_boundary_value(&p, &nl, 60.0, x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_state_follows_logistic_flow() {
        let nl = Nonlinearity::logistic(1.0).unwrap();
        let grid = uniform_spec(-10.0, 10.0, 64).build().unwrap();
        let n = grid.len();
        let mut state = CauchyState::new(grid, vec![0.3; n]).unwrap();
        let far = |t: f64, _x: f64| nl.flow(0.3, t);
        step(&mut state, 0.01, &nl, &far, true).unwrap();
        let exact = nl.flow(0.3, 0.01);
        for v in &state.u {
            assert!((v - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn observation_count() {
        assert_eq!(observation_times(0.5, 10.0).len(), 21);
        assert_eq!(observation_times(0.5, 0.0), vec![0.0]);
        assert_eq!(
            observation_times(0.3, 1.0),
            vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]
        );
    }

    #[test]
    fn zero_horizon_gives_initial_observation() {
        let nl = Nonlinearity::logistic(1.0).unwrap();
        let p = InitialProfile::new(
            Family::Exponential,
            &BTreeMap::from([("alpha".to_string(), 0.5)]),
            0.9,
            None,
            2.0,
        )
        .unwrap();
        let cfg = SolverConfig::new(uniform_spec(-20.0, 60.0, 800));
        let rec = run(&p, &nl, &cfg, 0.0, &mut []).unwrap();
        assert_eq!(rec.observations.len(), 1);
        assert_eq!(rec.state.t, 0.0);
    }

    #[test]
    fn heat_kernel_short_time() {
        let grid = uniform_spec(-20.0, 20.0, 2000).build().unwrap();
        let u: Vec<f64> = grid.nodes().iter().map(|x| (-x * x).exp()).collect();
        let state = CauchyState::new(grid, u).unwrap();
        let mut cfg = SolverConfig::new(uniform_spec(-20.0, 20.0, 2000));
        cfg.time_step = TimeStep::Fixed { dt: 0.002 };
        cfg.check_monotone = false;
        cfg.expand = false;
        let far = |_t: f64, _x: f64| 0.0;
        let rec = run_from_state(state, &PureDiffusion, &far, &cfg, 0.5, &mut []).unwrap();
        assert!(rec.succeeded());
        let t = 0.5;
        let err = rec
            .state
            .nodes()
            .iter()
            .zip(&rec.state.u)
            .map(|(x, v)| (v - (-x * x / (1.0 + 4.0 * t)).exp() / (1.0 + 4.0 * t).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn invariant_violation_is_reported() {
        let grid = uniform_spec(0.0, 1.0, 32).build().unwrap();
        let mut u = vec![0.5; 33];
        u[10] = 0.6;
        let mut s = CauchyState::new(grid, u).unwrap();
        match s.check_invariants(true) {
            Err(Error::InvariantViolation { kind, node, .. }) => {
                assert_eq!(kind, "monotone");
                assert_eq!(node, 10);
            }
            other => panic!("{other:?}"),
        }
        s.u[3] = 1.5;
        assert!(matches!(
            s.check_invariants(false),
            Err(Error::InvariantViolation {
                kind: "range",
                node: 3,
                ..
            })
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::new(uniform_spec(0.0, 1.0, 32));
        assert!(cfg.validate().is_ok());
        cfg.time_step = TimeStep::Fixed { dt: 1.0 };
        assert!(cfg.validate().is_err());
        cfg.time_step = TimeStep::default();
        cfg.tracked_levels = vec![1.5];
        assert!(cfg.validate().is_err());
    }
}
