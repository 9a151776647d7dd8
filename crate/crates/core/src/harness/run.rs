//! One experiment: solve, observe, check, persist.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{CheckSpec, ExperimentConfig};
use crate::error::{Error, Result};
use crate::levelsets::{
    average_speed, fit_growth_law, GrowthFit, LevelSetObserver, LevelSetTrajectory,
};
use crate::nonlinearity::Nonlinearity;
use crate::profiles::InitialProfile;
use crate::solver::{self, Observer, RunRecord};
use crate::theory::{
    self, band_membership, derive_comparison_params, flatness_report, ode_reduction_residual,
    refined_band, BoundKind, CheckReport, FlatnessObserver, FlatnessRecord, SandwichObserver,
};

pub const MANIFEST: &str = "manifest.json";
pub const TRAJECTORIES: &str = "trajectories.csv";
pub const FLATNESS: &str = "flatness.csv";
pub const CHECKS: &str = "checks.json";
pub const FITS: &str = "fits.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Run finished and every check passed.
    Passed,
    /// Run finished and at least one check failed.
    ChecksFailed,
    /// The solver or a check raised an error.
    Error,
}

impl RunStatus {
    /// Process exit code: 0 pass, 2 check failures, 1 runtime error.
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Passed => 0,
            RunStatus::ChecksFailed => 2,
            RunStatus::Error => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSummary {
    pub steps: usize,
    pub rejected: usize,
    pub forced: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub expansions: usize,
    pub invariant_checks: usize,
    pub final_nodes: usize,
    pub final_x_right: f64,
    pub final_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    /// Canonical TOML of the configuration.
    pub config: String,
    pub family: String,
    pub status: RunStatus,
    pub error: Option<String>,
    pub wall_time_s: f64,
    pub observations: usize,
    pub invariants: Option<InvariantSummary>,
    pub checks_total: usize,
    pub checks_passed: usize,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST))
            .map_err(|e| Error::Io(format!("{}: {e}", dir.join(MANIFEST).display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        toml::from_str(&self.config).map_err(|e| Error::Config(e.to_string()))
    }
}

/// In-memory result of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub trajectories: Vec<LevelSetTrajectory>,
    pub flatness: Vec<FlatnessRecord>,
    pub checks: Vec<CheckReport>,
    pub fits: Vec<GrowthFit>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.manifest.status.exit_code()
    }
}

fn write_trajectories(path: &Path, trajs: &[LevelSetTrajectory]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "lambda", "x_min", "x_max", "empty"])?;
    for traj in trajs {
        for s in &traj.samples {
            w.write_record([
                s.t.to_string(),
                traj.lambda.to_string(),
                s.x_min.to_string(),
                s.x_max.to_string(),
                (s.empty as u8).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectories(path: &Path) -> Result<Vec<LevelSetTrajectory>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out: Vec<LevelSetTrajectory> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Io(format!("{}: short record", path.display())))?
                .parse::<f64>()
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
        };
        let (t, lambda, x_min, x_max) = (field(0)?, field(1)?, field(2)?, field(3)?);
        let empty = field(4)? != 0.0;
        let traj = match out.iter_mut().find(|tr| tr.lambda == lambda) {
            Some(tr) => tr,
            None => {
                out.push(LevelSetTrajectory::new(lambda)?);
                out.last_mut().unwrap()
            }
        };
        traj.push(t, (!empty).then_some((x_min, x_max)));
    }
    Ok(out)
}

fn write_flatness(path: &Path, records: &[FlatnessRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "sup_ux", "sup_v", "m_plus", "m_minus"])?;
    for r in records {
        w.write_record([r.t, r.sup_ux, r.sup_v, r.m_plus, r.m_minus].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn error_report(check: &str, e: &Error) -> CheckReport {
    CheckReport {
        check: check.into(),
        params: BTreeMap::new(),
        entry_time: None,
        worst_margin: f64::NAN,
        pass: false,
        error: Some(e.to_string()),
    }
}

fn selected<'a>(levels: &[f64], trajs: &'a [LevelSetTrajectory]) -> Vec<&'a LevelSetTrajectory> {
    trajs
        .iter()
        .filter(|t| levels.is_empty() || levels.contains(&t.lambda))
        .collect()
}

fn trajectory(trajs: &[LevelSetTrajectory], lambda: f64) -> Result<&LevelSetTrajectory> {
    trajs
        .iter()
        .find(|t| t.lambda == lambda)
        .ok_or_else(|| Error::Config(format!("level {lambda} not tracked")))
}

struct Evaluated {
    checks: Vec<CheckReport>,
    fits: Vec<GrowthFit>,
}

/// Evaluate the post-run checks on recorded trajectories and flatness records.
fn evaluate_checks(
    cfg: &ExperimentConfig,
    p: &InitialProfile,
    nl: &Nonlinearity,
    trajs: &[LevelSetTrajectory],
    flat: &[FlatnessRecord],
    sandwich: Option<&SandwichObserver>,
) -> Evaluated {
    let mut checks = Vec::new();
    let mut fits = Vec::new();
    for spec in &cfg.checks {
        match spec {
            CheckSpec::Band {
                eps,
                gamma,
                big_gamma,
                levels,
            } => {
                for tr in selected(levels, trajs) {
                    let g = gamma.unwrap_or(tr.lambda);
                    let gg = big_gamma.unwrap_or(tr.lambda);
                    checks.push(match band_membership(tr, p, nl, *eps, g, gg) {
                        Ok(r) => CheckReport::from(&r),
                        Err(e) => error_report("band", &e),
                    });
                }
            }
            CheckSpec::OdeReduction { eps, levels } => {
                for tr in selected(levels, trajs) {
                    checks.push(match ode_reduction_residual(tr, p, nl, *eps) {
                        Ok(r) => CheckReport::from(&r),
                        Err(e) => error_report("ode_reduction", &e),
                    });
                }
            }
            CheckSpec::RefinedBand {
                bracket,
                window,
                levels,
            } => {
                for tr in selected(levels, trajs) {
                    checks.push(match refined_band(tr, p, nl, *bracket, *window) {
                        Ok(r) => CheckReport::from(&r),
                        Err(e) => error_report("refined_band", &e),
                    });
                }
            }
            CheckSpec::Sandwich { tolerance, .. } => {
                checks.push(match sandwich {
                    Some(obs) => CheckReport::from(&obs.report(*tolerance)),
                    None => error_report(
                        "sandwich",
                        &Error::Hypothesis("comparison constants unavailable".into()),
                    ),
                });
            }
            CheckSpec::Flatness { slack, t_a, t_b } => {
                checks.push(CheckReport::from(&flatness_report(
                    flat, *slack, *t_a, *t_b,
                )));
            }
            CheckSpec::Fit {
                law,
                lambda,
                window,
                param,
                expected,
                tolerance,
            } => {
                let fit =
                    trajectory(trajs, *lambda).and_then(|tr| fit_growth_law(tr, *law, *window));
                match fit {
                    Ok(fit) => {
                        if let (Some(name), Some(exp)) = (param, expected) {
                            let measured = fit.param(name).unwrap_or(f64::NAN);
                            let tol = tolerance.unwrap_or(0.05);
                            let rel = (measured / exp - 1.0).abs();
                            checks.push(CheckReport {
                                check: format!("fit_{law}"),
                                params: BTreeMap::from([
                                    ("lambda".into(), *lambda),
                                    ("expected".into(), *exp),
                                    ("measured".into(), measured),
                                    ("tolerance".into(), tol),
                                    ("r2".into(), fit.r2),
                                ]),
                                entry_time: None,
                                worst_margin: tol - rel,
                                pass: rel <= tol,
                                error: None,
                            });
                        }
                        fits.push(fit);
                    }
                    Err(e) => checks.push(error_report(&format!("fit_{law}"), &e)),
                }
            }
            CheckSpec::Speed {
                lambda,
                window,
                expected,
                tolerance,
            } => {
                let speed = trajectory(trajs, *lambda)
                    .and_then(|tr| average_speed(tr, window[0], window[1]));
                checks.push(match speed {
                    Ok(c) => {
                        let rel = (c / expected - 1.0).abs();
                        CheckReport {
                            check: "speed".into(),
                            params: BTreeMap::from([
                                ("lambda".into(), *lambda),
                                ("t_a".into(), window[0]),
                                ("t_b".into(), window[1]),
                                ("expected".into(), *expected),
                                ("measured".into(), c),
                                ("tolerance".into(), *tolerance),
                            ]),
                            entry_time: None,
                            worst_margin: tolerance - rel,
                            pass: rel <= *tolerance,
                            error: None,
                        }
                    }
                    Err(e) => error_report("speed", &e),
                });
            }
        }
    }
    Evaluated { checks, fits }
}

/// Run one experiment into `dir` (created if needed).
///
/// Configuration errors are returned before anything is written. Solver and
/// check errors are recorded in the manifest and keep partial artifacts.
pub fn run_experiment_in(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let (p, nl) = cfg.resolve_profile()?;
    let solver_cfg = cfg.effective_solver();
    fs::create_dir_all(dir)?;
    let start = Instant::now();

    let mut levels = LevelSetObserver::new(&cfg.levels)?;
    let mut flat = FlatnessObserver::default();
    let mut sandwich = None;
    let mut setup_error = None;
    if let Some(eps) = cfg.checks.iter().find_map(|c| match c {
        CheckSpec::Sandwich { eps, .. } => Some(*eps),
        _ => None,
    }) {
        let bounds = derive_comparison_params(&p, &nl, eps, BoundKind::Super).and_then(|up| {
            let lo = derive_comparison_params(&p, &nl, eps, BoundKind::Sub)?;
            SandwichObserver::new(p.clone(), up, lo)
        });
        match bounds {
            Ok(obs) => sandwich = Some(obs),
            Err(e) => setup_error = Some(e),
        }
    }

    let record: Result<RunRecord> = {
        let mut observers: Vec<&mut dyn Observer> = vec![&mut levels, &mut flat];
        if let Some(s) = sandwich.as_mut() {
            observers.push(s);
        }
        solver::run(&p, &nl, &solver_cfg, cfg.t_end, &mut observers)
    };
    let (observations, invariants, mut error) = match &record {
        Ok(rec) => {
            let st = &rec.state;
            (
                rec.observations.len(),
                Some(InvariantSummary {
                    steps: st.stats.steps,
                    rejected: st.stats.rejected,
                    forced: st.stats.forced,
                    dt_min: st.stats.dt_min,
                    dt_max: st.stats.dt_max,
                    expansions: st.stats.expansions.len(),
                    invariant_checks: st.stats.invariant_checks,
                    final_nodes: st.u.len(),
                    final_x_right: st.grid.x_right(),
                    final_t: st.t,
                }),
                rec.failure
                    .as_ref()
                    .map(|f| format!("solver failed at t={}: {}", f.t, f.error)),
            )
        }
        Err(e) => (0, None, Some(e.to_string())),
    };

    let trajs = levels.trajectories;
    let mut eval = evaluate_checks(cfg, &p, &nl, &trajs, &flat.records, sandwich.as_ref());
    if let Some(e) = setup_error {
        for c in eval.checks.iter_mut().filter(|c| c.check == "sandwich") {
            c.error = Some(e.to_string());
        }
    }
    if error.is_none() {
        if let Some(c) = eval.checks.iter().find(|c| c.error.is_some()) {
            error = Some(format!(
                "check `{}`: {}",
                c.check,
                c.error.as_deref().unwrap_or("")
            ));
        }
    }

    write_trajectories(&dir.join(TRAJECTORIES), &trajs)?;
    write_flatness(&dir.join(FLATNESS), &flat.records)?;
    write_json(&dir.join(CHECKS), &eval.checks)?;
    write_json(&dir.join(FITS), &eval.fits)?;

    let checks_passed = eval.checks.iter().filter(|c| c.pass).count();
    let status = if error.is_some() {
        RunStatus::Error
    } else if checks_passed < eval.checks.len() {
        RunStatus::ChecksFailed
    } else {
        RunStatus::Passed
    };
    let manifest = Manifest {
        name: cfg.name.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.to_toml_string()?,
        family: cfg.profile.family.as_str().into(),
        status,
        error,
        wall_time_s: start.elapsed().as_secs_f64(),
        observations,
        invariants,
        checks_total: eval.checks.len(),
        checks_passed,
        files: [TRAJECTORIES, FLATNESS, CHECKS, FITS]
            .map(String::from)
            .to_vec(),
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        manifest,
        trajectories: trajs,
        flatness: flat.records,
        checks: eval.checks,
        fits: eval.fits,
    })
}

/// Run into the configured output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    run_experiment_in(cfg, &cfg.output_dir())
}

/// Sanity check of the nonlinearity envelopes and the profile's slow decay.
pub fn check_kpp(nl: &Nonlinearity, profile: Option<&InitialProfile>) -> Vec<CheckReport> {
    let env = nl.verify_envelopes(10_000);
    let mut out: Vec<CheckReport> = env
        .checks
        .iter()
        .map(|c| CheckReport {
            check: format!("kpp_{}", c.name),
            params: BTreeMap::from([("worst_at".into(), c.worst_at)]),
            entry_time: None,
            worst_margin: c.worst_margin,
            pass: c.passed,
            error: None,
        })
        .collect();
    if let Some(p) = profile {
        match p.verify_slow_decay(&[0.5, 0.1, 0.01], 1e12) {
            Ok(slow) => {
                let mut params =
                    BTreeMap::from([("final_curvature_ratio".into(), slow.final_curvature_ratio)]);
                for e in &slow.entries {
                    params.insert(format!("passed_eps_{}", e.eps), e.passed as u8 as f64);
                }
                out.push(CheckReport {
                    check: "slow_decay".into(),
                    params,
                    entry_time: None,
                    worst_margin: f64::NAN,
                    pass: slow.all_passed() && slow.curvature_ratio_vanishes,
                    error: None,
                });
            }
            Err(e) => out.push(error_report("slow_decay", &e)),
        }
        let bounds = [1e2, 1e3, 1e4, 1e5, 1e6];
        match theory::log_derivative_lp(p, 2.0, &bounds) {
            Ok(lp) => out.push(CheckReport {
                check: "log_derivative_l2".into(),
                params: BTreeMap::from([
                    ("p".into(), lp.p),
                    (
                        "integral".into(),
                        lp.partials.last().map_or(f64::NAN, |v| v.1),
                    ),
                    ("last_increment".into(), lp.last_increment),
                ]),
                entry_time: None,
                worst_margin: theory::flatness::LP_RELATIVE_TOLERANCE - lp.last_increment,
                pass: lp.converged,
                error: None,
            }),
            Err(e) => out.push(error_report("log_derivative_l2", &e)),
        }
    }
    out
}
