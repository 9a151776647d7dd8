//! Logarithmic slope `v = u_x / u` of the solution and its extrema.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::InitialProfile;
use crate::solver::{CauchyState, Observer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatnessRecord {
    pub t: f64,
    pub sup_ux: f64,
    pub sup_v: f64,
    /// `sup (u_x/u)^+`
    pub m_plus: f64,
    /// `inf -(u_x/u)^-`
    pub m_minus: f64,
}

/// Metrics of nodal values on arbitrary nodes (`u_x` by the nonuniform centered stencil).
pub fn flatness_from_nodes(t: f64, grid: &crate::grid::Grid, u: &[f64]) -> FlatnessRecord {
    let ux = grid.gradient(u);
    let mut r = FlatnessRecord {
        t,
        sup_ux: 0.0,
        sup_v: 0.0,
        m_plus: 0.0,
        m_minus: 0.0,
    };
    for (&d, &v) in ux.iter().zip(u) {
        r.sup_ux = r.sup_ux.max(d.abs());
        if v > 0.0 {
            let w = d / v;
            r.sup_v = r.sup_v.max(w.abs());
            r.m_plus = r.m_plus.max(w);
            r.m_minus = r.m_minus.min(w);
        }
    }
    r
}

pub fn flatness_metrics(state: &CauchyState) -> Result<FlatnessRecord> {
    if state.u.len() < 3 {
        return Err(Error::Grid("flatness needs at least 3 nodes".into()));
    }
    Ok(flatness_from_nodes(state.t, &state.grid, &state.u))
}

#[derive(Debug, Clone, Default)]
pub struct FlatnessObserver {
    pub records: Vec<FlatnessRecord>,
}

impl Observer for FlatnessObserver {
    fn observe(&mut self, state: &CauchyState) -> Result<()> {
        self.records.push(flatness_metrics(state)?);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub slack: f64,
    /// Largest increase of `M+` between consecutive observations.
    pub worst_m_plus_increase: f64,
    /// Largest decrease of `M-` between consecutive observations.
    pub worst_m_minus_decrease: f64,
    pub m_plus_nonincreasing: bool,
    pub m_minus_nondecreasing: bool,
    /// `sup|u_x/u|` at `t_b` over its value at `t_a`.
    pub decay_ratio: Option<f64>,
    pub decay_times: [f64; 2],
}

impl FlatnessReport {
    pub fn envelope_holds(&self) -> bool {
        self.m_plus_nonincreasing && self.m_minus_nondecreasing
    }
}

fn record_at(records: &[FlatnessRecord], t: f64) -> Option<&FlatnessRecord> {
    let tol = 1e-9 * t.abs().max(1.0);
    records.iter().find(|r| (r.t - t).abs() <= tol)
}

pub fn flatness_report(
    records: &[FlatnessRecord],
    slack: f64,
    t_a: f64,
    t_b: f64,
) -> FlatnessReport {
    let mut up: f64 = 0.0;
    let mut down: f64 = 0.0;
    for w in records.windows(2) {
        up = up.max(w[1].m_plus - w[0].m_plus);
        down = down.max(w[0].m_minus - w[1].m_minus);
    }
    let decay_ratio = match (record_at(records, t_a), record_at(records, t_b)) {
        (Some(a), Some(b)) if a.sup_v > 0.0 => Some(b.sup_v / a.sup_v),
        _ => None,
    };
    FlatnessReport {
        slack,
        worst_m_plus_increase: up,
        worst_m_minus_decrease: down,
        m_plus_nonincreasing: up <= slack,
        m_minus_nondecreasing: down <= slack,
        decay_ratio,
        decay_times: [t_a, t_b],
    }
}

/// Partial integrals of `|u0'/u0|^p` over `[-X, X]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpReport {
    pub p: f64,
    pub partials: Vec<(f64, f64)>,
    /// Relative change of the last partial integral.
    pub last_increment: f64,
    pub converged: bool,
}

pub const LP_RELATIVE_TOLERANCE: f64 = 1e-2;
const LP_INTERVALS: usize = 20_000;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Quadrature of `|u0'/u0|^p`; `u0` is flat left of the blend so only `[plateau_end, X]` contributes.
pub fn log_derivative_lp(profile: &InitialProfile, p: f64, bounds: &[f64]) -> Result<LpReport> {
    if !(p >= 1.0) {
        return Err(Error::param("p", "must be at least 1"));
    }
    let a = profile.plateau_end();
    let xb = profile.x_blend();
    if bounds.len() < 2 || bounds.windows(2).any(|w| w[1] <= w[0]) || bounds[0] <= xb {
        return Err(Error::param(
            "bounds",
            "need at least two increasing bounds beyond the blend",
        ));
    }
    let g = |x: f64| profile.log_derivative(x).abs().powf(p);
    let blend = simpson(g, a, xb, 2000);
    // x = xb + e^s - 1 resolves the slowly decaying integrand on long ranges
    let tail = |x_hi: f64| {
        simpson(
            |s: f64| g(xb + s.exp_m1()) * s.exp(),
            0.0,
            (x_hi - xb).ln_1p(),
            LP_INTERVALS,
        )
    };
    let partials: Vec<(f64, f64)> = bounds.iter().map(|&x| (x, blend + tail(x))).collect();
    let n = partials.len();
    let (prev, last) = (partials[n - 2].1, partials[n - 1].1);
    let last_increment = (last - prev).abs() / last.abs().max(f64::MIN_POSITIVE);
    Ok(LpReport {
        p,
        partials,
        last_increment,
        converged: last_increment < LP_RELATIVE_TOLERANCE,
    })
}
