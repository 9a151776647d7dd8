//! Location of level sets relative to `u0^{-1}` of exponentially shrinking values.
//!
//! All comparisons are done on `ln u0`, which stays finite far beyond the
//! point where `u0` itself underflows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelsets::LevelSetTrajectory;
use crate::nonlinearity::Nonlinearity;
use crate::profiles::InitialProfile;

use super::comparison::{derive_refined_params, BoundKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSample {
    pub t: f64,
    /// `ln u0(x_max) - ln(gamma e^{-(f'(0)+eps) t})`: negative when `x_max`
    /// is beyond the right edge of the band.
    pub x_max_margin: f64,
    /// `ln(Gamma e^{-(f'(0)-eps) t}) - ln u0(x_min)`: negative when `x_min`
    /// lags behind the left edge.
    pub x_min_margin: f64,
    pub member: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub lambda: f64,
    pub eps: f64,
    pub gamma: f64,
    #[serde(rename = "Gamma")]
    pub big_gamma: f64,
    pub samples: Vec<BandSample>,
    /// First sample time `t > 0` inside the band.
    pub first_entry: Option<f64>,
    /// Start of the last uninterrupted run of member samples.
    pub final_entry: Option<f64>,
    /// Member-to-outside transitions after `first_entry`.
    pub re_exits: usize,
    /// Smallest log-margin over samples from `first_entry` on.
    pub worst_margin: f64,
    pub pass: bool,
}

impl BandReport {
    pub fn entered(&self) -> bool {
        self.first_entry.is_some()
    }

    /// `x_max` inside the right edge at the last sample.
    pub fn right_edge_holds(&self) -> bool {
        self.samples.last().is_some_and(|s| s.x_max_margin >= 0.0)
    }

    /// `x_min` inside the left edge at the last sample.
    pub fn left_edge_holds(&self) -> bool {
        self.samples.last().is_some_and(|s| s.x_min_margin >= 0.0)
    }
}

fn check_eps(nl: &Nonlinearity, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < nl.fprime0()) {
        return Err(Error::OutOfRange {
            value: eps,
            range: "(0, f'(0))",
        });
    }
    Ok(())
}

/// Membership of `E_lambda(t)` in `u0^{-1}[gamma e^{-(f'(0)+eps)t}, Gamma e^{-(f'(0)-eps)t}]`.
pub fn band_membership(
    traj: &LevelSetTrajectory,
    p: &InitialProfile,
    nl: &Nonlinearity,
    eps: f64,
    gamma: f64,
    big_gamma: f64,
) -> Result<BandReport> {
    check_eps(nl, eps)?;
    if !(gamma > 0.0 && big_gamma > 0.0) {
        return Err(Error::param("gamma", "gamma and Gamma must be positive"));
    }
    let fp = nl.fprime0();
    let samples: Vec<BandSample> = traj
        .samples
        .iter()
        .filter(|s| s.t > 0.0)
        .map(|s| {
            if s.empty {
                return BandSample {
                    t: s.t,
                    x_max_margin: f64::NEG_INFINITY,
                    x_min_margin: f64::NEG_INFINITY,
                    member: false,
                };
            }
            let x_max_margin = p.ln_value(s.x_max) - (gamma.ln() - (fp + eps) * s.t);
            let x_min_margin = (big_gamma.ln() - (fp - eps) * s.t) - p.ln_value(s.x_min);
            BandSample {
                t: s.t,
                x_max_margin,
                x_min_margin,
                member: x_max_margin >= 0.0 && x_min_margin >= 0.0,
            }
        })
        .collect();

    let first = samples.iter().position(|s| s.member);
    let mut re_exits = 0;
    let mut final_entry = None;
    if let Some(j) = first {
        let mut inside = false;
        for s in &samples[j..] {
            if s.member && !inside {
                final_entry = Some(s.t);
            }
            if !s.member && inside {
                re_exits += 1;
            }
            inside = s.member;
        }
        if !inside {
            final_entry = None;
        }
    }
    let from = first.unwrap_or(0);
    let worst_margin = samples[from..]
        .iter()
        .map(|s| s.x_max_margin.min(s.x_min_margin))
        .fold(f64::INFINITY, f64::min);
    Ok(BandReport {
        lambda: traj.lambda,
        eps,
        gamma,
        big_gamma,
        first_entry: first.map(|j| samples[j].t),
        final_entry,
        re_exits,
        worst_margin: if samples.is_empty() {
            f64::NAN
        } else {
            worst_margin
        },
        pass: first.is_some() && re_exits == 0,
        samples,
    })
}

/// Entry times are nonincreasing in `eps` (a wider band is entered no later).
pub fn entry_monotone_in_eps(reports: &[BandReport]) -> bool {
    let mut sorted: Vec<&BandReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    sorted
        .windows(2)
        .all(|w| match (w[0].first_entry, w[1].first_entry) {
            (Some(a), Some(b)) => b <= a,
            (None, _) => true,
            (Some(_), None) => false,
        })
}

/// `u0(x_lambda) e^{(f'(0)-eps)t} <= lambda <= u0(x_lambda) e^{(f'(0)+eps)t}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeReductionReport {
    pub lambda: f64,
    pub eps: f64,
    pub samples: Vec<BandSample>,
    /// First time both inequalities hold.
    pub entry_time: Option<f64>,
    /// Both hold at every sample after `entry_time`.
    pub persistent: bool,
    pub worst_margin: f64,
}

pub fn ode_reduction_residual(
    traj: &LevelSetTrajectory,
    p: &InitialProfile,
    nl: &Nonlinearity,
    eps: f64,
) -> Result<OdeReductionReport> {
    let band = band_membership(traj, p, nl, eps, traj.lambda, traj.lambda)?;
    Ok(OdeReductionReport {
        lambda: traj.lambda,
        eps,
        entry_time: band.first_entry,
        persistent: band.pass,
        worst_margin: band.worst_margin,
        samples: band.samples,
    })
}

/// `r(t) = u0(x_lambda(t)) e^{f'(0) t}` over a window, against a fixed bracket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedBandReport {
    pub lambda: f64,
    pub window: [f64; 2],
    pub bracket: [f64; 2],
    /// `(t, u0(x_min) e^{f'(0)t}, u0(x_max) e^{f'(0)t})`
    pub r: Vec<(f64, f64, f64)>,
    pub r_min: f64,
    pub r_max: f64,
    /// `min r / lambda`
    pub min_ratio: f64,
    /// `c = u0(xi1)` from the epsilon-free supersolution.
    pub c_lower: f64,
    pub within_bracket: bool,
    pub lower_bound_holds: bool,
    pub pass: bool,
}

pub fn refined_band(
    traj: &LevelSetTrajectory,
    p: &InitialProfile,
    nl: &Nonlinearity,
    bracket: [f64; 2],
    window: [f64; 2],
) -> Result<RefinedBandReport> {
    if !(bracket[0] > 0.0 && bracket[0] <= bracket[1] && bracket[1].is_finite()) {
        return Err(Error::param("bracket", "need 0 < lo <= hi < inf"));
    }
    let nu = nl
        .upper_envelope()
        .ok_or_else(|| Error::Hypothesis("nonlinearity has no strict upper envelope".into()))?
        .nu;
    let sup = derive_refined_params(p, nl, nu, BoundKind::Super)?;
    let fp = nl.fprime0();
    let r: Vec<(f64, f64, f64)> = traj
        .window(window[0], window[1])
        .map(|s| {
            (
                s.t,
                (p.ln_value(s.x_min) + fp * s.t).exp(),
                (p.ln_value(s.x_max) + fp * s.t).exp(),
            )
        })
        .collect();
    if r.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no level-set samples in [{}, {}]",
            window[0], window[1]
        )));
    }
    let r_max = r.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let r_min = r.iter().map(|v| v.2).fold(f64::INFINITY, f64::min);
    let min_ratio = r_min / traj.lambda;
    let within_bracket = r_min >= bracket[0] && r_max <= bracket[1];
    let lower_bound_holds = min_ratio >= sup.anchor_value;
    Ok(RefinedBandReport {
        lambda: traj.lambda,
        window,
        bracket,
        r,
        r_min,
        r_max,
        min_ratio,
        c_lower: sup.anchor_value,
        within_bracket,
        lower_bound_holds,
        pass: within_bracket && lower_bound_holds,
    })
}
