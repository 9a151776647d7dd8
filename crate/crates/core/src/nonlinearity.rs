//! KPP reaction terms and numerical checks of their structural hypotheses.
//!
//! A [`Nonlinearity`] carries the reaction rate `f` together with the
//! constants of its envelopes:
//!
//! * KPP bound: `0 < f(s) <= f'(0) s` on `(0, 1)`,
//! * lower envelope: `f(s) >= f'(0) s - M s^(1+delta)` on `(0, s0]`,
//! * optional strict upper envelope: `f(s) <= f'(0) s - mu s^(1+nu)` on `(0, 1]`,
//! * nonincreasing growth rate: `f'(s) <= f(s)/s` on `(0, 1]`.
//!
//! The envelopes are checked by dense sampling, see [`Nonlinearity::verify_envelopes`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode;

/// Slack allowed when `evaluate` receives a value just outside `[0, 1]`.
pub const CLAMP_SLACK: f64 = 1e-12;

/// Margin below which an envelope inequality is reported as failing.
pub const ENVELOPE_TOLERANCE: f64 = 1e-12;

/// A pointwise reaction rate driving `u_t = u_xx + rate(u)`.
///
/// `flow` is the time-`t` map of the reaction ODE `dU/dt = rate(U)`. The
/// default integrates it adaptively; closed forms should override it.
pub trait Reaction: Send + Sync {
    fn rate(&self, s: f64) -> f64;

    fn flow(&self, s0: f64, t: f64) -> f64 {
        if t == 0.0 {
            return s0;
        }
        ode::integrate_scalar(|u| self.rate(u), s0, t, 1e-12).unwrap_or(f64::NAN)
    }
}

/// Diffusion only. Used by the heat-kernel oracles; not a KPP term.
#[derive(Debug, Clone, Copy, Default)]
pub struct PureDiffusion;

impl Reaction for PureDiffusion {
    fn rate(&self, _s: f64) -> f64 {
        0.0
    }

    fn flow(&self, s0: f64, _t: f64) -> f64 {
        s0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// `f(s) = r s (1 - s)`
    Logistic { r: f64 },
}

/// `f(s) >= f'(0) s - m s^(1+delta)` on `(0, s0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerEnvelope {
    pub delta: f64,
    pub s0: f64,
    pub m: f64,
}

/// `f(s) <= f'(0) s - mu s^(1+nu)` on `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperEnvelope {
    pub mu: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    fprime0: f64,
    lower: LowerEnvelope,
    upper: Option<UpperEnvelope>,
}

impl Nonlinearity {
    /// `f(s) = r s (1 - s)`, concave, with `delta = nu = 1`, `M = mu = r`, `s0 = 1`.
    pub fn logistic(r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::param("r", format!("must be positive, got {r}")));
        }
        Ok(Self {
            kind: NonlinearityKind::Logistic { r },
            fprime0: r,
            lower: LowerEnvelope {
                delta: 1.0,
                s0: 1.0,
                m: r,
            },
            upper: Some(UpperEnvelope { mu: r, nu: 1.0 }),
        })
    }

    /// Resolve a nonlinearity from its configuration name and parameter map.
    pub fn from_spec(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        match name {
            "logistic" => {
                let r = params.get("r").copied().unwrap_or(1.0);
                if let Some(extra) = params.keys().find(|k| k.as_str() != "r") {
                    return Err(Error::Config(format!(
                        "unknown logistic parameter `{extra}`"
                    )));
                }
                Self::logistic(r)
            }
            other => Err(Error::Config(format!("unknown nonlinearity `{other}`"))),
        }
    }

    /// Replace the declared lower-envelope constants.
    pub fn with_lower_envelope(mut self, m: f64, delta: f64, s0: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::param("delta", "must be positive"));
        }
        if !(s0 > 0.0 && s0 <= 1.0) {
            return Err(Error::param("s0", "must lie in (0, 1]"));
        }
        if !(m >= 0.0) {
            return Err(Error::param("M", "must be nonnegative"));
        }
        self.lower = LowerEnvelope { delta, s0, m };
        Ok(self)
    }

    /// Replace (or remove) the declared strict upper envelope.
    pub fn with_upper_envelope(mut self, upper: Option<(f64, f64)>) -> Result<Self> {
        self.upper = match upper {
            None => None,
            Some((mu, nu)) if mu > 0.0 && nu > 0.0 => Some(UpperEnvelope { mu, nu }),
            Some(_) => return Err(Error::param("mu/nu", "must both be positive")),
        };
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            NonlinearityKind::Logistic { .. } => "logistic",
        }
    }

    pub fn kind(&self) -> NonlinearityKind {
        self.kind
    }

    /// `f'(0)`, the linearized growth rate at the unstable state.
    pub fn fprime0(&self) -> f64 {
        self.fprime0
    }

    pub fn lower_envelope(&self) -> LowerEnvelope {
        self.lower
    }

    pub fn upper_envelope(&self) -> Option<UpperEnvelope> {
        self.upper
    }

    /// `f(s)` for `s` in `[0, 1]`; values within `1e-12` outside are clamped.
    pub fn evaluate(&self, s: f64) -> Result<f64> {
        if !(-CLAMP_SLACK..=1.0 + CLAMP_SLACK).contains(&s) {
            return Err(Error::OutOfRange {
                value: s,
                range: "[0, 1]",
            });
        }
        Ok(self.raw(s.clamp(0.0, 1.0)))
    }

    /// `f'(s)`.
    pub fn derivative(&self, s: f64) -> f64 {
        match self.kind {
            NonlinearityKind::Logistic { r } => r * (1.0 - 2.0 * s),
        }
    }

    fn raw(&self, s: f64) -> f64 {
        match self.kind {
            NonlinearityKind::Logistic { r } => r * s * (1.0 - s),
        }
    }

    /// Check every declared inequality on a composite geometric + uniform
    /// sample of `(0, 1]`.
    pub fn verify_envelopes(&self, n_samples: usize) -> EnvelopeReport {
        let n_samples = n_samples.max(100);
        let samples = composite_samples(n_samples);
        let fp = self.fprime0;
        let mut checks = Vec::new();

        let mut kpp = MarginTracker::new("kpp");
        for &s in samples.iter().filter(|&&s| s < 1.0) {
            let f = self.raw(s);
            // strict positivity is reported through the same signed margin
            kpp.update(s, (fp * s - f).min(f));
        }
        checks.push(kpp.finish());

        let LowerEnvelope { delta, s0, m } = self.lower;
        let mut lower = MarginTracker::new("lower_envelope");
        for &s in samples.iter().filter(|&&s| s <= s0) {
            lower.update(s, self.raw(s) - (fp * s - m * s.powf(1.0 + delta)));
        }
        checks.push(lower.finish());

        if let Some(UpperEnvelope { mu, nu }) = self.upper {
            let mut upper = MarginTracker::new("upper_envelope");
            for &s in &samples {
                upper.update(s, fp * s - mu * s.powf(1.0 + nu) - self.raw(s));
            }
            checks.push(upper.finish());
        }

        let mut growth = MarginTracker::new("nonincreasing_growth_rate");
        for &s in &samples {
            growth.update(s, self.raw(s) / s - self.derivative(s));
        }
        checks.push(growth.finish());

        EnvelopeReport {
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }
}

impl Reaction for Nonlinearity {
    fn rate(&self, s: f64) -> f64 {
        self.raw(s)
    }

    fn flow(&self, s0: f64, t: f64) -> f64 {
        match self.kind {
            NonlinearityKind::Logistic { r } => {
                // U(t) = U0 e^{rt} / (1 + U0 (e^{rt} - 1))
                let g = (r * t).exp_m1();
                let value = s0 * (1.0 + g) / (1.0 + s0 * g);
                if value.is_nan() {
                    1.0
                } else {
                    value
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub name: String,
    /// Smallest signed margin; negative means the inequality is violated.
    pub worst_margin: f64,
    pub worst_at: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub checks: Vec<EnvelopeCheck>,
    pub passed: bool,
}

impl EnvelopeReport {
    pub fn check(&self, name: &str) -> Option<&EnvelopeCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct MarginTracker {
    name: &'static str,
    worst: f64,
    at: f64,
}

impl MarginTracker {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            worst: f64::INFINITY,
            at: f64::NAN,
        }
    }

    fn update(&mut self, s: f64, margin: f64) {
        if margin < self.worst || margin.is_nan() {
            self.worst = margin;
            self.at = s;
        }
    }

    fn finish(self) -> EnvelopeCheck {
        EnvelopeCheck {
            name: self.name.to_string(),
            worst_margin: self.worst,
            worst_at: self.at,
            passed: self.worst >= -ENVELOPE_TOLERANCE,
        }
    }
}

/// Geometric samples on `[1e-12, 1e-2]` followed by uniform samples on `(0, 1]`.
fn composite_samples(n: usize) -> Vec<f64> {
    let n_geo = n / 2;
    let n_uni = n - n_geo;
    let (lo, hi) = (1e-12_f64.ln(), 1e-2_f64.ln());
    let mut s: Vec<f64> = (0..n_geo)
        .map(|k| (lo + (hi - lo) * k as f64 / (n_geo - 1) as f64).exp())
        .collect();
    s.extend((1..=n_uni).map(|k| k as f64 / n_uni as f64));
    s
}
