//! Checks of the large-time theory on simulated level sets and states.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub mod bands;
pub mod comparison;
pub mod flatness;

pub use bands::{
    band_membership, entry_monotone_in_eps, ode_reduction_residual, refined_band, BandReport,
    BandSample, OdeReductionReport, RefinedBandReport,
};
pub use comparison::{
    derive_comparison_params, derive_refined_params, sandwich_margins, sandwich_report,
    subsolution_from_u0, subsolution_value, supersolution_value, BoundKind, ComparisonBound,
    SandwichObserver, SandwichReport, SandwichSample, SANDWICH_TOLERANCE,
};
pub use flatness::{
    flatness_from_nodes, flatness_metrics, flatness_report, log_derivative_lp, FlatnessObserver,
    FlatnessRecord, FlatnessReport, LpReport,
};

/// Uniform JSON summary of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub params: BTreeMap<String, f64>,
    pub entry_time: Option<f64>,
    /// Written as `null` when not finite.
    #[serde(deserialize_with = "nullable_f64")]
    pub worst_margin: f64,
    pub pass: bool,
    /// Set when the check could not be evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn nullable_f64<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn params<const N: usize>(kv: [(&str, f64); N]) -> BTreeMap<String, f64> {
    kv.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

impl From<&BandReport> for CheckReport {
    fn from(r: &BandReport) -> Self {
        CheckReport {
            check: "band".into(),
            params: params([
                ("lambda", r.lambda),
                ("eps", r.eps),
                ("gamma", r.gamma),
                ("Gamma", r.big_gamma),
                ("re_exits", r.re_exits as f64),
            ]),
            entry_time: r.first_entry,
            worst_margin: r.worst_margin,
            pass: r.pass,
            error: None,
        }
    }
}

impl From<&OdeReductionReport> for CheckReport {
    fn from(r: &OdeReductionReport) -> Self {
        CheckReport {
            check: "ode_reduction".into(),
            params: params([("lambda", r.lambda), ("eps", r.eps)]),
            entry_time: r.entry_time,
            worst_margin: r.worst_margin,
            pass: r.persistent,
            error: None,
        }
    }
}

impl From<&RefinedBandReport> for CheckReport {
    fn from(r: &RefinedBandReport) -> Self {
        CheckReport {
            check: "refined_band".into(),
            params: params([
                ("lambda", r.lambda),
                ("t_a", r.window[0]),
                ("t_b", r.window[1]),
                ("r_lo", r.bracket[0]),
                ("r_hi", r.bracket[1]),
                ("r_min", r.r_min),
                ("r_max", r.r_max),
                ("c", r.c_lower),
            ]),
            entry_time: None,
            // log distance to the nearest bracket end, negative when outside
            worst_margin: (r.r_min / r.bracket[0])
                .ln()
                .min((r.bracket[1] / r.r_max).ln()),
            pass: r.pass,
            error: None,
        }
    }
}

impl From<&SandwichReport> for CheckReport {
    fn from(r: &SandwichReport) -> Self {
        let mut p = params([
            ("tolerance", r.tolerance),
            ("rho_super", r.upper.rho),
            ("rho_sub", r.lower.rho),
            ("worst_upper", r.worst_upper.upper_margin),
            ("worst_lower", r.worst_lower.lower_margin),
        ]);
        if let Some(e) = r.upper.eps {
            p.insert("eps".into(), e);
        }
        if let Some(x) = r.upper.xi1 {
            p.insert("xi1".into(), x);
        }
        if let Some(x) = r.lower.xi2 {
            p.insert("xi2".into(), x);
        }
        if let Some(b) = r.lower.b {
            p.insert("B".into(), b);
        }
        CheckReport {
            check: "sandwich".into(),
            params: p,
            entry_time: None,
            worst_margin: r.tolerance - r.worst_margin(),
            pass: r.pass,
            error: None,
        }
    }
}

impl From<&FlatnessReport> for CheckReport {
    fn from(r: &FlatnessReport) -> Self {
        let mut p = params([
            ("slack", r.slack),
            ("m_plus_increase", r.worst_m_plus_increase),
            ("m_minus_decrease", r.worst_m_minus_decrease),
            ("t_a", r.decay_times[0]),
            ("t_b", r.decay_times[1]),
        ]);
        if let Some(d) = r.decay_ratio {
            p.insert("decay_ratio".into(), d);
        }
        CheckReport {
            check: "flatness".into(),
            params: p,
            entry_time: None,
            worst_margin: r.slack - r.worst_m_plus_increase.max(r.worst_m_minus_decrease),
            pass: r.envelope_holds() && r.decay_ratio.is_some_and(|d| d < 1.0),
            error: None,
        }
    }
}
