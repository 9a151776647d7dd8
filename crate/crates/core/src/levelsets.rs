//! Level-set positions `E_lambda(t) = {x : u(t, x) = lambda}` and growth-law fits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{CauchyState, Observer};

/// Extreme crossings of `level` by the piecewise-linear interpolant of `u`.
///
/// A node where `u` equals `level` exactly counts as a crossing at that node.
pub fn extract_crossings(nodes: &[f64], u: &[f64], level: f64) -> Option<(f64, f64)> {
    let mut first = None;
    let mut last = None;
    let mut note = |x: f64| {
        if first.is_none() {
            first = Some(x);
        }
        last = Some(x);
    };
    for i in 0..u.len() {
        let d = u[i] - level;
        if d == 0.0 {
            note(nodes[i]);
            continue;
        }
        if i + 1 < u.len() {
            let e = u[i + 1] - level;
            if e != 0.0 && (d > 0.0) != (e > 0.0) {
                let w = d / (d - e);
                note(nodes[i] + w * (nodes[i + 1] - nodes[i]));
            }
        }
    }
    Some((first?, last?))
}

pub fn state_crossings(state: &CauchyState, level: f64) -> Option<(f64, f64)> {
    extract_crossings(state.nodes(), &state.u, level)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSample {
    pub t: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetTrajectory {
    pub lambda: f64,
    pub samples: Vec<LevelSample>,
}

impl LevelSetTrajectory {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::OutOfRange {
                value: lambda,
                range: "(0, 1)",
            });
        }
        Ok(Self {
            lambda,
            samples: Vec::new(),
        })
    }

    /// Trajectory from explicit positions (one crossing per time).
    pub fn from_positions(
        lambda: f64,
        points: impl IntoIterator<Item = (f64, f64)>,
    ) -> Result<Self> {
        let mut traj = Self::new(lambda)?;
        traj.samples = points
            .into_iter()
            .map(|(t, x)| LevelSample {
                t,
                x_min: x,
                x_max: x,
                empty: false,
            })
            .collect();
        Ok(traj)
    }

    pub fn push(&mut self, t: f64, crossing: Option<(f64, f64)>) {
        self.samples.push(match crossing {
            Some((x_min, x_max)) => LevelSample {
                t,
                x_min,
                x_max,
                empty: false,
            },
            None => LevelSample {
                t,
                x_min: f64::NAN,
                x_max: f64::NAN,
                empty: true,
            },
        });
    }

    /// Empirical `t_lambda`: first sample time with a crossing.
    pub fn t_first_nonempty(&self) -> Option<f64> {
        self.samples.iter().find(|s| !s.empty).map(|s| s.t)
    }

    pub fn sample_at(&self, t: f64) -> Option<&LevelSample> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.samples.iter().find(|s| (s.t - t).abs() <= tol)
    }

    /// Non-empty samples with `t` in `[t_a, t_b]`.
    pub fn window(&self, t_a: f64, t_b: f64) -> impl Iterator<Item = &LevelSample> {
        let tol = 1e-9 * t_b.abs().max(1.0);
        self.samples
            .iter()
            .filter(move |s| !s.empty && s.t >= t_a - tol && s.t <= t_b + tol)
    }
}

/// `(x_min(t2) - x_min(t1)) / (t2 - t1)` using the samples recorded at those times.
pub fn average_speed(traj: &LevelSetTrajectory, t1: f64, t2: f64) -> Result<f64> {
    if !(t2 > t1) {
        return Err(Error::param("t2", "must exceed t1"));
    }
    let get = |t: f64| -> Result<f64> {
        match traj.sample_at(t) {
            Some(s) if !s.empty => Ok(s.x_min),
            Some(_) => Err(Error::InsufficientData(format!("level set empty at t={t}"))),
            None => Err(Error::InsufficientData(format!("no sample at t={t}"))),
        }
    };
    Ok((get(t2)? - get(t1)?) / (t2 - t1))
}

/// Growth laws fitted by least squares in transformed coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthLaw {
    /// `x` against `t`
    Linear,
    /// `x` against `t ln t`
    TLogT,
    /// `ln x` against `ln t`
    Power,
    /// `ln x` against `t`
    Exponential,
    /// `ln ln x` against `t`
    DoubleExponential,
}

impl GrowthLaw {
    pub const ALL: [GrowthLaw; 5] = [
        GrowthLaw::Linear,
        GrowthLaw::TLogT,
        GrowthLaw::Power,
        GrowthLaw::Exponential,
        GrowthLaw::DoubleExponential,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GrowthLaw::Linear => "linear",
            GrowthLaw::TLogT => "t_log_t",
            GrowthLaw::Power => "power",
            GrowthLaw::Exponential => "exponential",
            GrowthLaw::DoubleExponential => "double_exponential",
        }
    }

    fn transform(self, t: f64, x: f64) -> Result<(f64, f64)> {
        let bad = |what: &str| Err(Error::InsufficientData(format!("{what} at t={t}, x={x}")));
        match self {
            GrowthLaw::Linear => Ok((t, x)),
            GrowthLaw::TLogT => {
                if t <= 0.0 {
                    return bad("t ln t needs t > 0");
                }
                Ok((t * t.ln(), x))
            }
            GrowthLaw::Power => {
                if t <= 0.0 || x <= 1.0 {
                    return bad("power law needs t > 0 and x > 1");
                }
                Ok((t.ln(), x.ln()))
            }
            GrowthLaw::Exponential => {
                if x <= 1.0 {
                    return bad("exponential law needs x > 1");
                }
                Ok((t, x.ln()))
            }
            GrowthLaw::DoubleExponential => {
                if x <= std::f64::consts::E {
                    return bad("double exponential law needs x > e");
                }
                Ok((t, x.ln().ln()))
            }
        }
    }

    /// Names of `(slope, intercept)` in this law's parametrisation.
    fn param_names(self) -> (&'static str, &'static str) {
        match self {
            GrowthLaw::Linear => ("speed", "offset"),
            GrowthLaw::TLogT => ("slope", "offset"),
            GrowthLaw::Power => ("exponent", "prefactor"),
            GrowthLaw::Exponential => ("rate", "log_prefactor"),
            GrowthLaw::DoubleExponential => ("rate", "offset"),
        }
    }
}

impl fmt::Display for GrowthLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GrowthLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GrowthLaw::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::param("law", format!("unknown growth law `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub law: GrowthLaw,
    pub lambda: f64,
    pub window: [f64; 2],
    /// Slope in transformed coordinates.
    pub slope: f64,
    /// Intercept in transformed coordinates.
    pub intercept: f64,
    /// Named parameters; for the power law the prefactor is `e^{intercept}`.
    pub params: Vec<(String, f64)>,
    pub r2: f64,
    pub n: usize,
}

impl GrowthFit {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

/// Ordinary least squares `y = slope x + intercept`, returning `(slope, intercept, r2)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    (slope, intercept, r2)
}

pub const MIN_FIT_SAMPLES: usize = 10;

pub fn fit_growth_law(
    traj: &LevelSetTrajectory,
    law: GrowthLaw,
    window: [f64; 2],
) -> Result<GrowthFit> {
    let [t_a, t_b] = window;
    if !(t_b > t_a) {
        return Err(Error::param("window", "needs t_a < t_b"));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = traj
        .window(t_a, t_b)
        .map(|s| law.transform(s.t, s.x_min))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples in [{t_a}, {t_b}], need {MIN_FIT_SAMPLES}",
            xs.len()
        )));
    }
    let (slope, intercept, r2) = least_squares(&xs, &ys);
    let (a, b) = law.param_names();
    let b_value = if law == GrowthLaw::Power {
        intercept.exp()
    } else {
        intercept
    };
    Ok(GrowthFit {
        law,
        lambda: traj.lambda,
        window,
        slope,
        intercept,
        params: vec![(a.to_string(), slope), (b.to_string(), b_value)],
        r2,
        n: xs.len(),
    })
}

/// Records the crossings of each tracked level at every observation.
#[derive(Debug, Clone, Default)]
pub struct LevelSetObserver {
    pub trajectories: Vec<LevelSetTrajectory>,
}

impl LevelSetObserver {
    pub fn new(levels: &[f64]) -> Result<Self> {
        Ok(Self {
            trajectories: levels
                .iter()
                .map(|&l| LevelSetTrajectory::new(l))
                .collect::<Result<_>>()?,
        })
    }

    pub fn trajectory(&self, lambda: f64) -> Option<&LevelSetTrajectory> {
        self.trajectories.iter().find(|t| t.lambda == lambda)
    }
}

impl Observer for LevelSetObserver {
    fn observe(&mut self, state: &CauchyState) -> Result<()> {
        for traj in &mut self.trajectories {
            traj.push(state.t, state_crossings(state, traj.lambda));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64, t0: f64, t1: f64, n: usize) -> LevelSetTrajectory {
        LevelSetTrajectory::from_positions(
            0.5,
            (0..=n).map(|k| {
                let t = t0 + (t1 - t0) * k as f64 / n as f64;
                (t, f(t))
            }),
        )
        .unwrap()
    }

    #[test]
    fn crossing_examples() {
        assert_eq!(
            extract_crossings(&[0.0, 1.0, 2.0], &[0.9, 0.9, 0.1], 0.5),
            Some((1.5, 1.5))
        );
        assert_eq!(
            extract_crossings(&[0.0, 1.0, 2.0], &[0.9, 0.8, 0.7], 0.5),
            None
        );
        assert_eq!(
            extract_crossings(&[0.0, 1.0, 2.0], &[0.9, 0.5, 0.1], 0.5),
            Some((1.0, 1.0))
        );
        // several crossings: extremes are reported
        assert_eq!(
            extract_crossings(&[0.0, 1.0, 2.0, 3.0], &[0.9, 0.1, 0.9, 0.1], 0.5),
            Some((0.5, 2.5))
        );
    }

    #[test]
    fn speeds() {
        let lin = synthetic(|t| 2.5 * t, 0.0, 10.0, 20);
        assert!((average_speed(&lin, 2.0, 6.0).unwrap() - 2.5).abs() < 1e-12);
        let ex = synthetic(f64::exp, 0.0, 3.0, 30);
        let e = std::f64::consts::E;
        assert!((average_speed(&ex, 1.0, 2.0).unwrap() - (e * e - e)).abs() < 1e-9);
        assert!(average_speed(&ex, 1.0, 1.0).is_err());
        assert!(average_speed(&ex, 1.0, 1.05).is_err());
    }

    #[test]
    fn exact_laws_are_recovered() {
        let f = fit_growth_law(
            &synthetic(|t| (0.5 * t).exp(), 1.0, 20.0, 40),
            GrowthLaw::Exponential,
            [1.0, 20.0],
        )
        .unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        let f = fit_growth_law(
            &synthetic(|t| t * t, 2.0, 20.0, 40),
            GrowthLaw::Power,
            [2.0, 20.0],
        )
        .unwrap();
        assert!((f.param("exponent").unwrap() - 2.0).abs() < 1e-12);
        assert!((f.param("prefactor").unwrap() - 1.0).abs() < 1e-12);
        let f = fit_growth_law(
            &synthetic(|t| 0.5 * t * t.ln(), 2.0, 50.0, 40),
            GrowthLaw::TLogT,
            [2.0, 50.0],
        )
        .unwrap();
        assert!((f.slope - 0.5).abs() < 1e-6);
        let f = fit_growth_law(
            &synthetic(|t| (0.3 * t).exp().exp(), 1.0, 5.0, 40),
            GrowthLaw::DoubleExponential,
            [1.0, 5.0],
        )
        .unwrap();
        assert!((f.slope - 0.3).abs() < 1e-9);
    }

    #[test]
    fn fit_rejections() {
        let few = synthetic(|t| t + 2.0, 0.0, 1.0, 5);
        assert!(matches!(
            fit_growth_law(&few, GrowthLaw::Linear, [0.0, 1.0]),
            Err(Error::InsufficientData(_))
        ));
        let small = synthetic(|_| 0.5, 1.0, 10.0, 20);
        assert!(fit_growth_law(&small, GrowthLaw::Exponential, [1.0, 10.0]).is_err());
        assert!("bogus".parse::<GrowthLaw>().is_err());
        assert_eq!("t_log_t".parse::<GrowthLaw>().unwrap(), GrowthLaw::TLogT);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn nested_for_monotone_data(
                steps in proptest::collection::vec(0.0f64..0.05, 40..120),
                l1 in 0.05f64..0.95, l2 in 0.05f64..0.95,
            ) {
                // a nonincreasing profile from 1 down
                let mut u = vec![1.0];
                for s in &steps {
                    let last = *u.last().unwrap();
                    u.push((last - s).max(0.0));
                }
                let x: Vec<f64> = (0..u.len()).map(|i| i as f64 * 0.3).collect();
                let (lo, hi) = if l1 < l2 { (l1, l2) } else { (l2, l1) };
                if let (Some(a), Some(b)) = (extract_crossings(&x, &u, lo), extract_crossings(&x, &u, hi)) {
                    prop_assert!(a.0 >= b.1 - 1e-12);
                }
            }
        }
    }
}
