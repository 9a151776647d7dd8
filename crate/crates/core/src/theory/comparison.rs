//! Explicit super- and subsolutions built from the initial datum.
//!
//! Supersolution, valid on `[xi1, inf)`:
//! `min(u0(x) e^{rho t} / u0(xi1), 1)`.
//! Subsolution, valid everywhere:
//! `max(s - B s^{1+delta}, 0)` with `s = u0(x) e^{rho t}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::profiles::InitialProfile;
use crate::solver::{CauchyState, Observer, Snapshot};

/// Upper end of the tail scan.
const SCAN_LIMIT: f64 = 1e12;
const SCAN_STEP: f64 = 0.01;
const SCAN_NEAR: f64 = 100.0;
const SCAN_FAR_SAMPLES: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Super,
    Sub,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBound {
    pub kind: BoundKind,
    pub rho: f64,
    /// Supersolution anchor; `None` for subsolutions.
    pub xi1: Option<f64>,
    /// Subsolution anchor; `None` for supersolutions.
    pub xi2: Option<f64>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    pub delta_eff: f64,
    pub s1: Option<f64>,
    /// `u0(xi1)` for supersolutions, `kappa = u0(xi2)` for subsolutions.
    pub anchor_value: f64,
    /// `None` for the epsilon-free constants with `rho = f'(0)`.
    pub eps: Option<f64>,
}

impl ComparisonBound {
    /// Largest `s` with `s - B s^{1+delta} > 0`.
    pub fn sub_threshold(&self) -> Option<f64> {
        self.b.map(|b| b.powf(-1.0 / self.delta_eff))
    }
}

/// Tail samples: a fine uniform stretch past the blend, then geometric out to `SCAN_LIMIT`.
fn scan_points(p: &InitialProfile) -> Vec<f64> {
    let start = p.plateau_end();
    let near_end = p.x_blend() + SCAN_NEAR;
    let n_near = ((near_end - start) / SCAN_STEP).ceil() as usize;
    let mut xs: Vec<f64> = (0..=n_near).map(|k| start + k as f64 * SCAN_STEP).collect();
    let (l0, l1) = (near_end.max(1.0).ln(), SCAN_LIMIT.ln());
    xs.extend(
        (1..=SCAN_FAR_SAMPLES).map(|k| (l0 + (l1 - l0) * k as f64 / SCAN_FAR_SAMPLES as f64).exp()),
    );
    xs.retain(|&x| x >= start);
    xs
}

/// Smallest `x >= floor` such that `|u0''| <= k u0` on every sampled point from `x` on.
fn curvature_anchor(p: &InitialProfile, k: f64, floor: f64) -> Result<f64> {
    let holds = |x: f64| p.curvature_ratio(x) <= k;
    let xs = scan_points(p);
    let last = *xs.last().unwrap();
    if !holds(last) {
        return Err(Error::Hypothesis(format!(
            "|u0''| <= {k} u0 fails at the end of the tail scan (x = {last:e}, ratio {})",
            p.curvature_ratio(last)
        )));
    }
    let Some(j) = xs.iter().rposition(|&x| !holds(x)) else {
        return Ok(floor.max(xs[0]));
    };
    // bisect between the last failing and the first passing sample
    let (mut lo, mut hi) = (xs[j], xs[j + 1]);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(floor.max(hi))
}

/// Constants of the `eps`-dependent comparison functions.
pub fn derive_comparison_params(
    p: &InitialProfile,
    nl: &Nonlinearity,
    eps: f64,
    kind: BoundKind,
) -> Result<ComparisonBound> {
    let fp = nl.fprime0();
    if !(eps > 0.0 && eps < fp) {
        return Err(Error::OutOfRange {
            value: eps,
            range: "(0, f'(0))",
        });
    }
    match kind {
        BoundKind::Super => {
            let xi1 = curvature_anchor(p, 0.5 * eps, f64::NEG_INFINITY)?;
            Ok(ComparisonBound {
                kind,
                rho: fp + 0.5 * eps,
                xi1: Some(xi1),
                xi2: None,
                b: None,
                delta_eff: nl.lower_envelope().delta,
                s1: None,
                anchor_value: p.value(xi1),
                eps: Some(eps),
            })
        }
        BoundKind::Sub => {
            let env = nl.lower_envelope();
            let delta = env.delta;
            // rho in (f'(0) - eps, f'(0)) with rho (1 + delta) > f'(0)
            let floor = fp / (1.0 + delta);
            let mut rho = fp - 0.5 * eps;
            if rho * (1.0 + delta) <= fp {
                rho = 0.5 * (floor.max(fp - eps) + fp);
            }
            let k = (fp - rho).min((rho * (1.0 + delta) - fp) / (2.0 * (1.0 + delta)));
            let xi2 = curvature_anchor(p, k, f64::NEG_INFINITY)?;
            let kappa = p.value(xi2);
            let s1 = env.s0.min(kappa);
            let b = s1
                .powf(-delta)
                .max(2.0 * env.m / (rho * (1.0 + delta) - fp));
            Ok(ComparisonBound {
                kind,
                rho,
                xi1: None,
                xi2: Some(xi2),
                b: Some(b),
                delta_eff: delta,
                s1: Some(s1),
                anchor_value: kappa,
                eps: Some(eps),
            })
        }
    }
}

/// Constants with `rho = f'(0)` under `|u0''| <= M' u0^{1+beta}` in the tail.
///
/// The supersolution needs the strict upper envelope `f(s) <= f'(0) s - mu s^{1+nu}`
/// and `beta >= nu`; the subsolution uses `beta' = min(beta, delta)`.
pub fn derive_refined_params(
    p: &InitialProfile,
    nl: &Nonlinearity,
    beta: f64,
    kind: BoundKind,
) -> Result<ComparisonBound> {
    let fp = nl.fprime0();
    if !(beta > 0.0) {
        return Err(Error::param("beta", "must be positive"));
    }
    let x_max = SCAN_LIMIT;
    match kind {
        BoundKind::Super => {
            let up = nl.upper_envelope().ok_or_else(|| {
                Error::Hypothesis("nonlinearity has no strict upper envelope (mu, nu)".into())
            })?;
            if beta < up.nu {
                return Err(Error::Hypothesis(format!(
                    "need beta >= nu, got beta = {beta}, nu = {}",
                    up.nu
                )));
            }
            let bound = p.tail_power_bound(up.nu, x_max);
            if !bound.bounded {
                return Err(Error::Hypothesis(format!(
                    "|u0''| / u0^(1+{}) is unbounded on the sampled tail",
                    up.nu
                )));
            }
            // M' u0(xi1)^nu <= mu
            let ln_level = (up.mu / bound.m_prime).ln() / up.nu;
            let xi1 = if ln_level >= p.ln_value(p.x_blend()) {
                p.x_blend()
            } else {
                p.invert_tail_ln(ln_level)?
            };
            Ok(ComparisonBound {
                kind,
                rho: fp,
                xi1: Some(xi1),
                xi2: None,
                b: None,
                delta_eff: up.nu,
                s1: None,
                anchor_value: p.value(xi1),
                eps: None,
            })
        }
        BoundKind::Sub => {
            let env = nl.lower_envelope();
            let bp = beta.min(env.delta);
            let bound = p.tail_power_bound(bp, x_max);
            if !bound.bounded {
                return Err(Error::Hypothesis(format!(
                    "|u0''| / u0^(1+{bp}) is unbounded on the sampled tail"
                )));
            }
            let k = fp * bp / (2.0 * (1.0 + bp));
            let xi2 = curvature_anchor(p, k, p.x_blend())?;
            let kappa = p.value(xi2);
            let s1 = env.s0.min(kappa);
            let b = s1
                .powf(-bp)
                .max(2.0 * (env.m + fp * bound.m_prime) / (fp * bp));
            Ok(ComparisonBound {
                kind,
                rho: fp,
                xi1: None,
                xi2: Some(xi2),
                b: Some(b),
                delta_eff: bp,
                s1: Some(s1),
                anchor_value: kappa,
                eps: None,
            })
        }
    }
}

fn expect_kind(cb: &ComparisonBound, kind: BoundKind) -> Result<()> {
    if cb.kind != kind {
        return Err(Error::param("kind", format!("expected {kind:?} constants")));
    }
    Ok(())
}

/// Supersolution from `ln u0(x)`; the caller guarantees `x >= xi1`.
fn super_from_ln(cb: &ComparisonBound, ln_u0: f64, t: f64) -> f64 {
    (ln_u0 + cb.rho * t - cb.anchor_value.ln()).exp().min(1.0)
}

pub fn supersolution_value(
    cb: &ComparisonBound,
    p: &InitialProfile,
    t: f64,
    x: f64,
) -> Result<f64> {
    expect_kind(cb, BoundKind::Super)?;
    let xi1 = cb.xi1.unwrap_or(f64::NEG_INFINITY);
    if x < xi1 {
        return Err(Error::OutOfRange {
            value: x,
            range: "[xi1, inf)",
        });
    }
    Ok(super_from_ln(cb, p.ln_value(x), t))
}

/// `max(s - B s^{1+delta}, 0)` with `s = u0 e^{rho t}`, from the value `u0`.
pub fn subsolution_from_u0(cb: &ComparisonBound, u0: f64, t: f64) -> f64 {
    sub_from_ln(cb, u0.ln(), t)
}

fn sub_from_ln(cb: &ComparisonBound, ln_u0: f64, t: f64) -> f64 {
    let ln_s = ln_u0 + cb.rho * t;
    let b = cb.b.unwrap_or(0.0);
    let s = ln_s.exp();
    if let Some(th) = cb.sub_threshold() {
        if s >= th {
            return 0.0;
        }
    }
    (s - b * s * s.powf(cb.delta_eff)).max(0.0)
}

pub fn subsolution_value(cb: &ComparisonBound, p: &InitialProfile, t: f64, x: f64) -> Result<f64> {
    expect_kind(cb, BoundKind::Sub)?;
    Ok(sub_from_ln(cb, p.ln_value(x), t))
}

/// Worst violations of `u <= upper` (on `x >= xi1`) and `lower <= u` at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichSample {
    pub t: f64,
    pub upper_margin: f64,
    pub upper_x: Option<f64>,
    pub lower_margin: f64,
    pub lower_x: Option<f64>,
}

pub const SANDWICH_TOLERANCE: f64 = 1e-3;

pub fn sandwich_margins(
    p: &InitialProfile,
    upper: &ComparisonBound,
    lower: &ComparisonBound,
    t: f64,
    nodes: &[f64],
    u: &[f64],
) -> SandwichSample {
    let xi1 = upper.xi1.unwrap_or(f64::INFINITY);
    let mut s = SandwichSample {
        t,
        upper_margin: 0.0,
        upper_x: None,
        lower_margin: 0.0,
        lower_x: None,
    };
    for (&x, &v) in nodes.iter().zip(u) {
        let ln_u0 = p.ln_value(x);
        if x >= xi1 {
            let m = v - super_from_ln(upper, ln_u0, t);
            if m > s.upper_margin {
                s.upper_margin = m;
                s.upper_x = Some(x);
            }
        }
        let m = sub_from_ln(lower, ln_u0, t) - v;
        if m > s.lower_margin {
            s.lower_margin = m;
            s.lower_x = Some(x);
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub upper: ComparisonBound,
    pub lower: ComparisonBound,
    pub tolerance: f64,
    pub samples: Vec<SandwichSample>,
    pub worst_upper: SandwichSample,
    pub worst_lower: SandwichSample,
    pub pass: bool,
}

impl SandwichReport {
    pub fn from_samples(
        upper: ComparisonBound,
        lower: ComparisonBound,
        samples: Vec<SandwichSample>,
        tolerance: f64,
    ) -> Self {
        let zero = SandwichSample {
            t: 0.0,
            upper_margin: 0.0,
            upper_x: None,
            lower_margin: 0.0,
            lower_x: None,
        };
        let worst_upper = samples.iter().copied().fold(zero, |a, b| {
            if b.upper_margin > a.upper_margin {
                b
            } else {
                a
            }
        });
        let worst_lower = samples.iter().copied().fold(zero, |a, b| {
            if b.lower_margin > a.lower_margin {
                b
            } else {
                a
            }
        });
        let pass = worst_upper.upper_margin < tolerance && worst_lower.lower_margin < tolerance;
        Self {
            upper,
            lower,
            tolerance,
            samples,
            worst_upper,
            worst_lower,
            pass,
        }
    }

    pub fn worst_margin(&self) -> f64 {
        self.worst_upper
            .upper_margin
            .max(self.worst_lower.lower_margin)
    }
}

/// Margins over stored snapshots.
pub fn sandwich_report(
    snapshots: &[Snapshot],
    p: &InitialProfile,
    upper: &ComparisonBound,
    lower: &ComparisonBound,
) -> Result<SandwichReport> {
    expect_kind(upper, BoundKind::Super)?;
    expect_kind(lower, BoundKind::Sub)?;
    let samples = snapshots
        .iter()
        .map(|s| sandwich_margins(p, upper, lower, s.t, &s.nodes, &s.u))
        .collect();
    Ok(SandwichReport::from_samples(
        *upper,
        *lower,
        samples,
        SANDWICH_TOLERANCE,
    ))
}

/// Computes sandwich margins during a run without storing states.
#[derive(Debug, Clone)]
pub struct SandwichObserver {
    profile: InitialProfile,
    upper: ComparisonBound,
    lower: ComparisonBound,
    pub samples: Vec<SandwichSample>,
}

impl SandwichObserver {
    pub fn new(
        profile: InitialProfile,
        upper: ComparisonBound,
        lower: ComparisonBound,
    ) -> Result<Self> {
        expect_kind(&upper, BoundKind::Super)?;
        expect_kind(&lower, BoundKind::Sub)?;
        Ok(Self {
            profile,
            upper,
            lower,
            samples: Vec::new(),
        })
    }

    pub fn report(&self, tolerance: f64) -> SandwichReport {
        SandwichReport::from_samples(self.upper, self.lower, self.samples.clone(), tolerance)
    }
}

impl Observer for SandwichObserver {
    fn observe(&mut self, state: &CauchyState) -> Result<()> {
        self.samples.push(sandwich_margins(
            &self.profile,
            &self.upper,
            &self.lower,
            state.t,
            state.nodes(),
            &state.u,
        ));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::Family;
    use std::collections::BTreeMap;

    fn algebraic2() -> InitialProfile {
        InitialProfile::new(
            Family::Algebraic,
            &BTreeMap::from([("alpha".to_string(), 2.0)]),
            0.9,
            None,
            2.0,
        )
        .unwrap()
    }

    fn logistic() -> Nonlinearity {
        Nonlinearity::logistic(1.0).unwrap()
    }

    #[test]
    fn algebraic_constants() {
        let (p, nl) = (algebraic2(), logistic());
        let sup = derive_comparison_params(&p, &nl, 0.2, BoundKind::Super).unwrap();
        assert!((sup.xi1.unwrap() - 60f64.sqrt()).abs() < 1e-9, "{sup:?}");
        assert!((sup.rho - 1.1).abs() < 1e-15);
        let sub = derive_comparison_params(&p, &nl, 0.2, BoundKind::Sub).unwrap();
        assert!((sub.rho - 0.9).abs() < 1e-15);
        assert!(sub.rho * 2.0 > 1.0);
        // k = min(0.1, 0.8 / 4) = 0.1, so xi2 = sqrt(60), kappa = 1/60
        assert!((sub.xi2.unwrap() - 60f64.sqrt()).abs() < 1e-9);
        assert!((sub.s1.unwrap() - 1.0 / 60.0).abs() < 1e-9);
        assert!((sub.b.unwrap() - 60.0).abs() < 1e-6);

        let sub4 = derive_comparison_params(&p, &nl, 0.4, BoundKind::Sub).unwrap();
        assert!((sub4.xi2.unwrap() - 40f64.sqrt()).abs() < 1e-9);
        assert!((sub4.b.unwrap() - 40.0).abs() < 1e-6);
        let sup4 = derive_comparison_params(&p, &nl, 0.4, BoundKind::Super).unwrap();
        assert!((sup4.xi1.unwrap() - 30f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn b_formula_arithmetic() {
        // s1 = 0.4, M = 1, rho = 0.9, delta = 1
        let b = 0.4f64.powf(-1.0).max(2.0 * 1.0 / (0.9 * 2.0 - 1.0));
        assert!((b - 2.5).abs() < 1e-15);
    }

    #[test]
    fn eps_out_of_range() {
        let (p, nl) = (algebraic2(), logistic());
        assert!(derive_comparison_params(&p, &nl, 1.0, BoundKind::Super).is_err());
        assert!(derive_comparison_params(&p, &nl, 0.0, BoundKind::Sub).is_err());
    }

    #[test]
    fn exponential_tail_has_no_anchor() {
        let p = InitialProfile::new(
            Family::Exponential,
            &BTreeMap::from([("alpha".to_string(), 0.5)]),
            0.9,
            None,
            2.0,
        )
        .unwrap();
        let e = derive_comparison_params(&p, &logistic(), 0.2, BoundKind::Super).unwrap_err();
        assert!(matches!(e, Error::Hypothesis(_)));
    }

    #[test]
    fn super_values() {
        let (p, nl) = (algebraic2(), logistic());
        let sup = derive_comparison_params(&p, &nl, 0.2, BoundKind::Super).unwrap();
        let xi1 = sup.xi1.unwrap();
        assert!((supersolution_value(&sup, &p, 0.0, xi1).unwrap() - 1.0).abs() < 1e-12);
        let v = supersolution_value(&sup, &p, 0.0, 2.0 * xi1).unwrap();
        assert!((v - 0.25).abs() < 1e-12);
        assert_eq!(supersolution_value(&sup, &p, 100.0, 1e6).unwrap(), 1.0);
        assert!(supersolution_value(&sup, &p, 0.0, xi1 - 1.0).is_err());
    }

    #[test]
    fn sub_values() {
        let mut cb =
            derive_comparison_params(&algebraic2(), &logistic(), 0.2, BoundKind::Sub).unwrap();
        cb.b = Some(2.5);
        let v = subsolution_from_u0(&cb, 1e-4, 0.0);
        // 1e-4 - 2.5e-8
        assert!((v / 9.9975e-5 - 1.0).abs() < 1e-12, "{v:e}");
        assert_eq!(subsolution_from_u0(&cb, 0.5, 0.0), 0.0);
        assert_eq!(subsolution_from_u0(&cb, 1e-3, 50.0), 0.0);
        let tiny = subsolution_from_u0(&cb, 1e-12, 0.0);
        assert!((tiny / 1e-12 - 1.0).abs() < 1e-11);
    }

    #[test]
    fn margins_vanish_at_time_zero() {
        let (p, nl) = (algebraic2(), logistic());
        let sup = derive_comparison_params(&p, &nl, 0.4, BoundKind::Super).unwrap();
        let sub = derive_comparison_params(&p, &nl, 0.4, BoundKind::Sub).unwrap();
        let nodes: Vec<f64> = (0..5000).map(|k| -10.0 + 0.1 * k as f64).collect();
        let u: Vec<f64> = nodes.iter().map(|&x| p.value(x)).collect();
        let s = sandwich_margins(&p, &sup, &sub, 0.0, &nodes, &u);
        assert_eq!(s.upper_margin, 0.0);
        assert_eq!(s.lower_margin, 0.0);
    }

    #[test]
    fn refined_constants() {
        let (p, nl) = (algebraic2(), logistic());
        let sup = derive_refined_params(&p, &nl, 1.0, BoundKind::Super).unwrap();
        // M' = 6 on the pure tail, u0(x_blend) already below mu / M'
        assert_eq!(sup.xi1.unwrap(), p.x_blend());
        assert!(sup.anchor_value < 1.0 / 6.0);
        let sub = derive_refined_params(&p, &nl, 1.0, BoundKind::Sub).unwrap();
        // k = 1/4, 6 x^-2 <= 1/4 from x = sqrt(24)
        assert!((sub.xi2.unwrap() - 24f64.sqrt()).abs() < 1e-9);
        assert!(derive_refined_params(&p, &nl, 0.5, BoundKind::Super).is_err());
    }
}
