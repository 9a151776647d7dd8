//! Front-like initial conditions with slowly decaying tails.
//!
//! A profile is constant (`plateau`) far to the left, equals an analytic
//! tail on `[x_blend, +inf)`, and in between is the convex combination
//! `plateau (1 - S) + tail S` with `S` the quintic smoothstep over
//! `[x_blend - blend_width, x_blend]`. Since `S`, `S'`, `S''` vanish at the
//! left joint and `S' = S'' = 0`, `S = 1` at the right one, the profile is C²;
//! it is nonincreasing as long as the tail is nonincreasing and below the
//! plateau on the blend interval.
//!
//! Every tail is written as `exp(-phi(x))`, so values, derivatives and the
//! slow-decay checks can be evaluated in log space far beyond the range of f64.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PLATEAU: f64 = 0.9;
pub const DEFAULT_BLEND_WIDTH: f64 = 2.0;

/// Tail family tags as they appear in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `C e^{-alpha x}`
    Exponential,
    /// `C e^{-alpha x / ln x}`
    Tlnt,
    /// `C e^{-beta x^alpha}`, `0 < alpha < 1`
    StretchedExp,
    /// `C x^{-alpha}`
    Algebraic,
    /// `C (ln x)^{-alpha}`
    LogPower,
    /// `e^{-f'(0) g^{-1}(x)}` for a prescribed curve `g`
    TargetCurve,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Exponential => "exponential",
            Family::Tlnt => "tlnt",
            Family::StretchedExp => "stretched_exp",
            Family::Algebraic => "algebraic",
            Family::LogPower => "log_power",
            Family::TargetCurve => "target_curve",
        }
    }

    /// True when `u0(x) e^{eps x} -> +inf` for every `eps > 0`.
    pub fn is_slowly_decaying(self) -> bool {
        !matches!(self, Family::Exponential)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Built-in curves `g` with closed-form inverses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetCurve {
    /// `g(t) = a t^2`
    Quadratic { a: f64 },
    /// `g(t) = e^{b t}`
    Exponential { b: f64 },
}

impl TargetCurve {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TargetCurve::Quadratic { a } => a * t * t,
            TargetCurve::Exponential { b } => (b * t).exp(),
        }
    }

    pub fn inverse(&self, x: f64) -> f64 {
        match *self {
            TargetCurve::Quadratic { a } => (x / a).sqrt(),
            TargetCurve::Exponential { b } => x.ln() / b,
        }
    }

    fn from_params(params: &BTreeMap<String, f64>) -> Result<Self> {
        match (params.get("a"), params.get("b")) {
            (Some(&a), None) if a > 0.0 => Ok(TargetCurve::Quadratic { a }),
            (None, Some(&b)) if b > 0.0 => Ok(TargetCurve::Exponential { b }),
            _ => Err(Error::param(
                "target_curve",
                "expected exactly one of `a` (g = a t^2) or `b` (g = e^{bt}), positive",
            )),
        }
    }
}

/// Analytic tail `exp(-phi(x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Tail {
    Exponential { alpha: f64, c: f64 },
    Tlnt { alpha: f64, c: f64 },
    StretchedExp { alpha: f64, beta: f64, c: f64 },
    Algebraic { alpha: f64, c: f64 },
    LogPower { alpha: f64, c: f64 },
    Target { curve: TargetCurve, rate: f64 },
}

impl Tail {
    /// Left end of the interval on which the tail is defined and nonincreasing.
    fn domain_start(&self) -> f64 {
        match *self {
            Tail::Exponential { .. } => f64::NEG_INFINITY,
            Tail::Tlnt { .. } => std::f64::consts::E,
            Tail::StretchedExp { .. } | Tail::Algebraic { .. } => 0.0,
            Tail::LogPower { .. } => 1.0,
            Tail::Target { curve, .. } => curve.value(0.0),
        }
    }

    /// `(phi, phi', phi'')`
    fn exponent(&self, x: f64) -> (f64, f64, f64) {
        match *self {
            Tail::Exponential { alpha, c } => (alpha * x - c.ln(), alpha, 0.0),
            Tail::Tlnt { alpha, c } => {
                let l = x.ln();
                (
                    alpha * x / l - c.ln(),
                    alpha * (l - 1.0) / (l * l),
                    alpha * (2.0 - l) / (x * l * l * l),
                )
            }
            Tail::StretchedExp { alpha, beta, c } => {
                let xa = x.powf(alpha);
                (
                    beta * xa - c.ln(),
                    alpha * beta * xa / x,
                    alpha * (alpha - 1.0) * beta * xa / (x * x),
                )
            }
            Tail::Algebraic { alpha, c } => (alpha * x.ln() - c.ln(), alpha / x, -alpha / (x * x)),
            Tail::LogPower { alpha, c } => {
                let l = x.ln();
                (
                    alpha * l.ln() - c.ln(),
                    alpha / (x * l),
                    -alpha * (l + 1.0) / (x * x * l * l),
                )
            }
            Tail::Target { curve, rate } => match curve {
                TargetCurve::Quadratic { a } => {
                    let s = (x / a).sqrt();
                    (rate * s, rate * s / (2.0 * x), -rate * s / (4.0 * x * x))
                }
                TargetCurve::Exponential { b } => {
                    let k = rate / b;
                    (k * x.ln(), k / x, -k / (x * x))
                }
            },
        }
    }

    fn ln_value(&self, x: f64) -> f64 {
        -self.exponent(x).0
    }

    /// `(T, T', T'')`
    fn derivatives(&self, x: f64) -> (f64, f64, f64) {
        let (phi, d1, d2) = self.exponent(x);
        let t = (-phi).exp();
        (t, -d1 * t, (d1 * d1 - d2) * t)
    }

    /// `|T''| / T`
    fn curvature_ratio(&self, x: f64) -> f64 {
        let (_, d1, d2) = self.exponent(x);
        (d1 * d1 - d2).abs()
    }

    /// Solve `T(x) = level` on the decreasing branch.
    fn inverse(&self, level: f64) -> f64 {
        let y = -level.ln();
        match *self {
            Tail::Exponential { alpha, c } => (y + c.ln()) / alpha,
            Tail::Algebraic { alpha, c } => ((y + c.ln()) / alpha).exp(),
            Tail::StretchedExp { alpha, beta, c } => ((y + c.ln()) / beta).powf(1.0 / alpha),
            Tail::LogPower { alpha, c } => ((y + c.ln()) / alpha).exp().exp(),
            Tail::Tlnt { alpha, c } => solve_x_over_ln_x((y + c.ln()) / alpha),
            Tail::Target { curve, rate } => curve.value(y / rate),
        }
    }
}

/// Root `x >= e` of `x / ln x = z`, i.e. `x = -z W_{-1}(-1/z)`, by
/// Newton iteration on `x - z ln x` safeguarded with bisection.
fn solve_x_over_ln_x(z: f64) -> f64 {
    let e = std::f64::consts::E;
    if z <= e {
        return e;
    }
    let h = |x: f64| x - z * x.ln();
    let (mut lo, mut hi) = (z, 2.0 * z * z.ln() + e);
    let mut x = z * (z.ln() + z.ln().ln().max(0.0));
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let hx = h(x);
        if hx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = hx / (1.0 - z / x);
        let mut next = x - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x {
            return next;
        }
        x = next;
    }
    x
}

/// Which derivative of the profile to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Value,
    First,
    Second,
}

/// Configuration-level description of a profile; resolved by [`InitialProfile::from_spec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub family: Family,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default = "default_plateau")]
    pub plateau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_blend: Option<f64>,
    #[serde(default = "default_blend_width")]
    pub blend_width: f64,
}

fn default_plateau() -> f64 {
    DEFAULT_PLATEAU
}

fn default_blend_width() -> f64 {
    DEFAULT_BLEND_WIDTH
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialProfile {
    family: Family,
    params: BTreeMap<String, f64>,
    tail: Tail,
    plateau: f64,
    x_blend: f64,
    blend_width: f64,
}

fn positive(
    params: &BTreeMap<String, f64>,
    key: &'static str,
    default: Option<f64>,
) -> Result<f64> {
    let v = match (params.get(key), default) {
        (Some(&v), _) => v,
        (None, Some(d)) => d,
        (None, None) => return Err(Error::param(key, "missing")),
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::param(key, format!("must be positive, got {v}")))
    }
}

impl InitialProfile {
    /// Build a profile; `x_blend = None` selects the family default, the
    /// smallest blend point with `tail(x_blend - blend_width) <= plateau / 2`.
    pub fn new(
        family: Family,
        params: &BTreeMap<String, f64>,
        plateau: f64,
        x_blend: Option<f64>,
        blend_width: f64,
    ) -> Result<Self> {
        let c = || positive(params, "C", Some(1.0));
        let tail = match family {
            Family::Exponential => Tail::Exponential {
                alpha: positive(params, "alpha", None)?,
                c: c()?,
            },
            Family::Tlnt => Tail::Tlnt {
                alpha: positive(params, "alpha", None)?,
                c: c()?,
            },
            Family::StretchedExp => {
                let alpha = positive(params, "alpha", None)?;
                if alpha >= 1.0 {
                    return Err(Error::param("alpha", "stretched_exp needs alpha in (0, 1)"));
                }
                Tail::StretchedExp {
                    alpha,
                    beta: positive(params, "beta", None)?,
                    c: c()?,
                }
            }
            Family::Algebraic => Tail::Algebraic {
                alpha: positive(params, "alpha", None)?,
                c: c()?,
            },
            Family::LogPower => Tail::LogPower {
                alpha: positive(params, "alpha", None)?,
                c: c()?,
            },
            Family::TargetCurve => Tail::Target {
                curve: TargetCurve::from_params(params)?,
                rate: positive(params, "fprime0", None)?,
            },
        };
        if !(plateau > 0.0 && plateau < 1.0) {
            return Err(Error::param("plateau", "must lie in (0, 1)"));
        }
        if !(blend_width > 0.0 && blend_width.is_finite()) {
            return Err(Error::param("blend_width", "must be positive"));
        }
        let x_blend = match x_blend {
            Some(x) => x,
            None => default_blend_point(&tail, plateau, blend_width),
        };
        let left = x_blend - blend_width;
        if !(left > tail.domain_start()) {
            return Err(Error::param(
                "x_blend",
                format!(
                    "tail of `{family}` is not defined on the blend interval [{left}, {x_blend}]"
                ),
            ));
        }
        let tail_left = tail.ln_value(left).exp();
        if !(tail_left < plateau) {
            return Err(Error::param(
                "x_blend",
                format!("tail({left}) = {tail_left} is not below the plateau {plateau}"),
            ));
        }
        Ok(Self {
            family,
            params: params.clone(),
            tail,
            plateau,
            x_blend,
            blend_width,
        })
    }

    pub fn from_spec(spec: &ProfileSpec) -> Result<Self> {
        Self::new(
            spec.family,
            &spec.params,
            spec.plateau,
            spec.x_blend,
            spec.blend_width,
        )
    }

    /// Profile with tail `e^{-fprime0 g^{-1}(x)}` for a built-in curve `g`.
    pub fn from_target_curve(curve: TargetCurve, fprime0: f64) -> Result<Self> {
        let mut params = BTreeMap::new();
        match curve {
            TargetCurve::Quadratic { a } => params.insert("a".to_string(), a),
            TargetCurve::Exponential { b } => params.insert("b".to_string(), b),
        };
        params.insert("fprime0".to_string(), fprime0);
        let probe = Self::new(
            Family::TargetCurve,
            &params,
            DEFAULT_PLATEAU,
            None,
            DEFAULT_BLEND_WIDTH,
        )?;
        let x_blend = probe.x_blend.max(curve.value(0.0) + 1.0);
        Self::new(
            Family::TargetCurve,
            &params,
            DEFAULT_PLATEAU,
            Some(x_blend),
            DEFAULT_BLEND_WIDTH,
        )
    }

    pub fn spec(&self) -> ProfileSpec {
        ProfileSpec {
            family: self.family,
            params: self.params.clone(),
            plateau: self.plateau,
            x_blend: Some(self.x_blend),
            blend_width: self.blend_width,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn plateau(&self) -> f64 {
        self.plateau
    }

    pub fn x_blend(&self) -> f64 {
        self.x_blend
    }

    pub fn blend_width(&self) -> f64 {
        self.blend_width
    }

    /// Left end of the blend; the profile is constant to the left of it.
    pub fn plateau_end(&self) -> f64 {
        self.x_blend - self.blend_width
    }

    /// `(u0, u0', u0'')` at `x`.
    pub fn derivatives(&self, x: f64) -> (f64, f64, f64) {
        let xa = self.plateau_end();
        if x >= self.x_blend {
            return self.tail.derivatives(x);
        }
        if x <= xa {
            return (self.plateau, 0.0, 0.0);
        }
        let w = self.blend_width;
        let s = (x - xa) / w;
        let sm = 1.0 - s;
        let sv = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
        let sd1 = 30.0 * s * s * sm * sm / w;
        let sd2 = 60.0 * s * sm * (1.0 - 2.0 * s) / (w * w);
        let (t, t1, t2) = self.tail.derivatives(x);
        let gap = t - self.plateau;
        (
            self.plateau + gap * sv,
            t1 * sv + gap * sd1,
            t2 * sv + 2.0 * t1 * sd1 + gap * sd2,
        )
    }

    pub fn evaluate(&self, x: f64, order: Derivative) -> f64 {
        let (v, d1, d2) = self.derivatives(x);
        match order {
            Derivative::Value => v,
            Derivative::First => d1,
            Derivative::Second => d2,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        if x >= self.x_blend {
            self.tail.ln_value(x).exp()
        } else {
            self.derivatives(x).0
        }
    }

    /// `ln u0(x)` on the tail region, exact even where `u0` underflows.
    pub fn ln_tail(&self, x: f64) -> f64 {
        self.tail.ln_value(x)
    }

    /// `ln u0(x)` everywhere, exact in the tail even where `u0` underflows.
    pub fn ln_value(&self, x: f64) -> f64 {
        if x >= self.x_blend {
            self.tail.ln_value(x)
        } else {
            self.derivatives(x).0.ln()
        }
    }

    /// `u0'(x) / u0(x)`.
    pub fn log_derivative(&self, x: f64) -> f64 {
        if x >= self.x_blend {
            -self.tail.exponent(x).1
        } else {
            let (v, d1, _) = self.derivatives(x);
            d1 / v
        }
    }

    /// `|u0''(x)| / u0(x)`.
    pub fn curvature_ratio(&self, x: f64) -> f64 {
        if x >= self.x_blend {
            self.tail.curvature_ratio(x)
        } else {
            let (v, _, d2) = self.derivatives(x);
            d2.abs() / v
        }
    }

    /// The unique `x >= x_blend` with `u0(x) = level`.
    pub fn invert_tail(&self, level: f64) -> Result<f64> {
        let top = self.tail.ln_value(self.x_blend).exp();
        if !(level > 0.0 && level <= top) {
            return Err(Error::OutOfRange {
                value: level,
                range: "(0, u0(x_blend)]",
            });
        }
        Ok(self.tail.inverse(level).max(self.x_blend))
    }

    /// Inverse in log space: the `x >= x_blend` with `ln u0(x) = ln_level`.
    pub fn invert_tail_ln(&self, ln_level: f64) -> Result<f64> {
        let top = self.tail.ln_value(self.x_blend);
        if !(ln_level <= top) {
            return Err(Error::OutOfRange {
                value: ln_level,
                range: "(-inf, ln u0(x_blend)]",
            });
        }
        // T(x) = level  <=>  phi(x) = -ln_level; the closed forms only use -ln(level).
        let x = match self.tail {
            Tail::Exponential { alpha, c } => (-ln_level + c.ln()) / alpha,
            Tail::Algebraic { alpha, c } => ((-ln_level + c.ln()) / alpha).exp(),
            Tail::StretchedExp { alpha, beta, c } => {
                ((-ln_level + c.ln()) / beta).powf(1.0 / alpha)
            }
            Tail::LogPower { alpha, c } => ((-ln_level + c.ln()) / alpha).exp().exp(),
            Tail::Tlnt { alpha, c } => solve_x_over_ln_x((-ln_level + c.ln()) / alpha),
            Tail::Target { curve, rate } => curve.value(-ln_level / rate),
        };
        Ok(x.max(self.x_blend))
    }

    /// Sampled check that `u0(x) e^{eps x}` grows without bound, and that
    /// `u0''/u0 -> 0`.
    pub fn verify_slow_decay(&self, eps_list: &[f64], x_max: f64) -> Result<SlowDecayReport> {
        if eps_list.is_empty() {
            return Err(Error::param("eps_list", "must not be empty"));
        }
        let x0 = self.x_blend.max(1.0);
        if !(x_max > x0) {
            return Err(Error::param("x_max", "must exceed max(x_blend, 1)"));
        }
        const N: usize = 4000;
        let (l0, l1) = (x0.ln(), x_max.ln());
        let xs: Vec<f64> = (0..N)
            .map(|k| (l0 + (l1 - l0) * k as f64 / (N - 1) as f64).exp())
            .collect();
        let threshold = 1e6_f64.ln();
        let entries = eps_list
            .iter()
            .map(|&eps| {
                let h: Vec<f64> = xs
                    .iter()
                    .map(|&x| self.tail.ln_value(x) + eps * x)
                    .collect();
                let start = (1..N).rev().find(|&k| h[k] <= h[k - 1]).unwrap_or(0);
                let increasing_from = (start < N - 1).then(|| xs[start]);
                let exceeds_at = (start..N).find(|&k| h[k] > threshold).map(|k| xs[k]);
                SlowDecayEntry {
                    eps,
                    increasing_from,
                    exceeds_at,
                    passed: increasing_from.is_some() && exceeds_at.is_some(),
                }
            })
            .collect();
        let ratios: Vec<f64> = xs.iter().map(|&x| self.tail.curvature_ratio(x)).collect();
        let final_ratio = ratios[N - 1];
        let tail_half = &ratios[N / 2..];
        let nonincreasing = tail_half
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-300);
        Ok(SlowDecayReport {
            entries,
            final_curvature_ratio: final_ratio,
            curvature_ratio_vanishes: nonincreasing && final_ratio < 1e-2,
        })
    }

    /// Sampled estimate of `sup |u0''| / u0^{1+beta}` on `[x_blend, x_max]`.
    ///
    /// `bounded` is false when the ratio is still growing at the far end.
    pub fn tail_power_bound(&self, beta: f64, x_max: f64) -> TailPowerBound {
        const N: usize = 2000;
        let x0 = self.x_blend.max(f64::MIN_POSITIVE);
        let (l0, l1) = (x0.ln(), x_max.max(x0 * 2.0).ln());
        let ln_ratio: Vec<f64> = (0..N)
            .map(|k| {
                let x = (l0 + (l1 - l0) * k as f64 / (N - 1) as f64).exp();
                let (phi, _, _) = self.tail.exponent(x);
                self.tail.curvature_ratio(x).ln() + beta * phi
            })
            .collect();
        let split = 3 * N / 4;
        let head = ln_ratio[..split]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let rear = ln_ratio[split..]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        TailPowerBound {
            beta,
            m_prime: head.max(rear).exp(),
            bounded: rear <= head + 1e-6,
        }
    }
}

fn default_blend_point(tail: &Tail, plateau: f64, blend_width: f64) -> f64 {
    let start = tail.domain_start();
    let lo = if start.is_finite() {
        start + 0.5
    } else {
        f64::NEG_INFINITY
    };
    let target = 0.5 * plateau;
    let x_star = if lo.is_finite() && tail.ln_value(lo).exp() <= target {
        lo
    } else {
        tail.inverse(target).max(lo)
    };
    x_star + blend_width
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowDecayEntry {
    pub eps: f64,
    /// Sample beyond which `ln u0 + eps x` is increasing.
    pub increasing_from: Option<f64>,
    /// First sample where `u0 e^{eps x}` exceeds `1e6`.
    pub exceeds_at: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowDecayReport {
    pub entries: Vec<SlowDecayEntry>,
    pub final_curvature_ratio: f64,
    pub curvature_ratio_vanishes: bool,
}

impl SlowDecayReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPowerBound {
    pub beta: f64,
    pub m_prime: f64,
    pub bounded: bool,
}
