//! TOML experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelsets::GrowthLaw;
use crate::nonlinearity::Nonlinearity;
use crate::profiles::{Family, InitialProfile, ProfileSpec};
use crate::solver::SolverConfig;

/// Environment variable naming the default root for run directories.
pub const OUTPUT_ROOT_ENV: &str = "KPPLAB_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl Default for NonlinearitySpec {
    fn default() -> Self {
        Self {
            name: "logistic".into(),
            params: BTreeMap::from([("r".into(), 1.0)]),
        }
    }
}

impl NonlinearitySpec {
    pub fn resolve(&self) -> Result<Nonlinearity> {
        Nonlinearity::from_spec(&self.name, &self.params)
    }
}

/// One theory or fit check evaluated after the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    /// Band inclusion; `gamma` and `Gamma` default to the level itself.
    Band {
        eps: f64,
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default, rename = "Gamma")]
        big_gamma: Option<f64>,
        /// Levels to check; all configured levels when empty.
        #[serde(default)]
        levels: Vec<f64>,
    },
    OdeReduction {
        eps: f64,
        #[serde(default)]
        levels: Vec<f64>,
    },
    RefinedBand {
        bracket: [f64; 2],
        window: [f64; 2],
        #[serde(default)]
        levels: Vec<f64>,
    },
    /// Sub/supersolution margins with constants derived from `eps`.
    Sandwich {
        eps: f64,
        #[serde(default = "default_sandwich_tolerance")]
        tolerance: f64,
    },
    Flatness {
        #[serde(default = "default_slack")]
        slack: f64,
        /// `sup|u_x/u|` at `t_b` must fall below its value at `t_a`.
        t_a: f64,
        t_b: f64,
    },
    /// Growth-law fit, optionally compared to an expected parameter.
    Fit {
        law: GrowthLaw,
        lambda: f64,
        window: [f64; 2],
        #[serde(default)]
        param: Option<String>,
        #[serde(default)]
        expected: Option<f64>,
        /// Relative tolerance on `expected`.
        #[serde(default)]
        tolerance: Option<f64>,
    },
    /// Average speed of `x_min` between two observation times.
    Speed {
        lambda: f64,
        window: [f64; 2],
        expected: f64,
        tolerance: f64,
    },
}

fn default_sandwich_tolerance() -> f64 {
    crate::theory::SANDWICH_TOLERANCE
}

fn default_slack() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub t_end: f64,
    pub levels: Vec<f64>,
    pub profile: ProfileSpec,
    #[serde(default)]
    pub nonlinearity: NonlinearitySpec,
    pub solver: SolverConfig,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    /// Run directory; defaults to `$KPPLAB_OUTPUT_ROOT/<name>` or `runs/<name>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn check_level(l: f64) -> Result<()> {
    if !(l > 0.0 && l < 1.0) {
        return Err(Error::Config(format!("level {l} outside (0, 1)")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Canonical TOML, embedded in manifests.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Everything that can be rejected without computing.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        {
            return Err(Error::Config(format!(
                "name `{}` must be non-empty and use only [A-Za-z0-9._-]",
                self.name
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config("t_end must be positive and finite".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::Config("at least one level is required".into()));
        }
        for &l in &self.levels {
            check_level(l)?;
        }
        self.solver.validate()?;
        self.resolve_profile()?;
        for c in &self.checks {
            let levels: &[f64] = match c {
                CheckSpec::Band { levels, .. }
                | CheckSpec::OdeReduction { levels, .. }
                | CheckSpec::RefinedBand { levels, .. } => levels,
                CheckSpec::Fit { lambda, .. } | CheckSpec::Speed { lambda, .. } => {
                    std::slice::from_ref(lambda)
                }
                _ => &[],
            };
            for &l in levels {
                check_level(l)?;
                if !self.levels.contains(&l) {
                    return Err(Error::Config(format!(
                        "check refers to level {l}, which is not tracked"
                    )));
                }
            }
            if let CheckSpec::Fit {
                expected: Some(_),
                param: None,
                ..
            } = c
            {
                return Err(Error::Config(
                    "fit check with `expected` needs `param`".into(),
                ));
            }
        }
        Ok(())
    }

    /// Target-curve profiles take `fprime0` from the nonlinearity unless given.
    pub fn resolve_profile(&self) -> Result<(InitialProfile, Nonlinearity)> {
        let nl = self.nonlinearity.resolve()?;
        let mut spec = self.profile.clone();
        if spec.family == Family::TargetCurve {
            spec.params.entry("fprime0".into()).or_insert(nl.fprime0());
        }
        let p = InitialProfile::from_spec(&spec)?;
        Ok((p, nl))
    }

    /// Solver settings with the configured levels tracked for expansion.
    pub fn effective_solver(&self) -> SolverConfig {
        let mut s = self.solver.clone();
        if s.tracked_levels.is_empty() {
            s.tracked_levels = self.levels.clone();
        }
        s
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| default_output_root().join(&self.name))
    }
}

pub fn default_output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}
