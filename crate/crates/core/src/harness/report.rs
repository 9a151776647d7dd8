//! Markdown summary of run directories against the predicted growth rates.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{read_trajectories, Manifest, CHECKS, FITS, TRAJECTORIES};
use crate::error::{Error, Result};
use crate::levelsets::{fit_growth_law, GrowthFit, GrowthLaw, LevelSetTrajectory};
use crate::profiles::{Family, ProfileSpec};
use crate::theory::CheckReport;

/// A predicted growth parameter with its acceptance tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub law: GrowthLaw,
    pub param: String,
    pub value: f64,
    /// Relative tolerance.
    pub tolerance: f64,
}

fn pred(label: &str, law: GrowthLaw, param: &str, value: f64, tolerance: f64) -> Prediction {
    Prediction {
        label: label.into(),
        law,
        param: param.into(),
        value,
        tolerance,
    }
}

/// Leading-order level-set motion for each tail family.
pub fn predictions(spec: &ProfileSpec, fprime0: f64) -> Vec<Prediction> {
    let get = |k: &str| spec.params.get(k).copied();
    let alpha = get("alpha").unwrap_or(f64::NAN);
    match spec.family {
        Family::Exponential => {
            let c = if alpha < fprime0.sqrt() {
                alpha + fprime0 / alpha
            } else {
                2.0 * fprime0.sqrt()
            };
            let tol = if alpha < fprime0.sqrt() { 0.02 } else { 0.05 };
            vec![pred("speed", GrowthLaw::Linear, "speed", c, tol)]
        }
        Family::Algebraic => vec![pred(
            "exp. rate",
            GrowthLaw::Exponential,
            "rate",
            fprime0 / alpha,
            0.05,
        )],
        Family::StretchedExp => {
            let beta = get("beta").unwrap_or(1.0);
            vec![
                pred(
                    "power exponent",
                    GrowthLaw::Power,
                    "exponent",
                    1.0 / alpha,
                    0.05,
                ),
                pred(
                    "power prefactor",
                    GrowthLaw::Power,
                    "prefactor",
                    (fprime0 / beta).powf(1.0 / alpha),
                    0.15,
                ),
            ]
        }
        Family::Tlnt => vec![pred(
            "t ln t slope",
            GrowthLaw::TLogT,
            "slope",
            fprime0 / alpha,
            0.10,
        )],
        Family::LogPower => vec![pred(
            "ln ln rate",
            GrowthLaw::DoubleExponential,
            "rate",
            fprime0 / alpha,
            0.10,
        )],
        Family::TargetCurve => match (get("a"), get("b")) {
            (Some(a), _) => vec![
                pred("power exponent", GrowthLaw::Power, "exponent", 2.0, 0.05),
                pred("power prefactor", GrowthLaw::Power, "prefactor", a, 0.15),
            ],
            (None, Some(b)) => vec![pred("exp. rate", GrowthLaw::Exponential, "rate", b, 0.05)],
            _ => Vec::new(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub run: String,
    pub label: String,
    pub predicted: f64,
    pub measured: Option<f64>,
    pub tolerance: f64,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub markdown: String,
    pub rows: Vec<ReportRow>,
    pub warnings: Vec<String>,
    pub plots: Vec<PathBuf>,
}

struct RunData {
    dir: PathBuf,
    manifest: Manifest,
    fprime0: f64,
    spec: ProfileSpec,
    t_end: f64,
    trajectories: Result<Vec<LevelSetTrajectory>>,
    fits: Result<Vec<GrowthFit>>,
    checks: Result<Vec<CheckReport>>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load(dir: &Path) -> Result<RunData> {
    let manifest = Manifest::load(dir)?;
    let cfg = manifest.experiment()?;
    let fprime0 = cfg.nonlinearity.resolve()?.fprime0();
    Ok(RunData {
        dir: dir.to_path_buf(),
        fprime0,
        spec: cfg.profile.clone(),
        t_end: cfg.t_end,
        trajectories: read_trajectories(&dir.join(TRAJECTORIES)),
        fits: read_json(&dir.join(FITS)),
        checks: read_json(&dir.join(CHECKS)),
        manifest,
    })
}

/// Recorded fit for `law`, else a fit of the level closest to 1/2 over the second half of the run.
fn measured(run: &RunData, p: &Prediction) -> Option<f64> {
    if let Ok(fits) = &run.fits {
        if let Some(v) = fits
            .iter()
            .find(|f| f.law == p.law)
            .and_then(|f| f.param(&p.param))
        {
            return Some(v);
        }
    }
    let trajs = run.trajectories.as_ref().ok()?;
    let tr = trajs
        .iter()
        .min_by(|a, b| (a.lambda - 0.5).abs().total_cmp(&(b.lambda - 0.5).abs()))?;
    fit_growth_law(tr, p.law, [0.5 * run.t_end, run.t_end])
        .ok()
        .and_then(|f| f.param(&p.param))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.4}"))
}

fn write_plot(path: &Path, trajs: &[LevelSetTrajectory]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["lambda", "t", "x", "ln_x", "ln_ln_x"])?;
    for tr in trajs {
        for s in tr.samples.iter().filter(|s| !s.empty) {
            let x = s.x_min;
            let lx = if x > 0.0 { x.ln() } else { f64::NAN };
            let llx = if lx > 0.0 { lx.ln() } else { f64::NAN };
            w.write_record([tr.lambda, s.t, x, lx, llx].map(|v| v.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Build the report for `dirs`; plot CSVs go to `plot_dir` when given.
pub fn report(dirs: &[PathBuf], plot_dir: Option<&Path>) -> Result<Report> {
    let mut rep = Report::default();
    let mut md = String::from("# kpplab report\n\n");
    if dirs.is_empty() {
        rep.warnings.push("no run directories given".into());
        md.push_str("> warning: no run directories given\n");
        rep.markdown = md;
        return Ok(rep);
    }
    if let Some(d) = plot_dir {
        fs::create_dir_all(d)?;
    }
    let mut by_family: BTreeMap<String, Vec<RunData>> = BTreeMap::new();
    for dir in dirs {
        match load(dir) {
            Ok(run) => by_family
                .entry(run.manifest.family.clone())
                .or_default()
                .push(run),
            Err(e) => rep.warnings.push(format!("{}: {e}", dir.display())),
        }
    }
    for (family, runs) in &by_family {
        let _ = writeln!(md, "## {family}\n");
        for run in runs {
            let m = &run.manifest;
            let _ = writeln!(md, "### {} (`{}`)\n", m.name, run.dir.display());
            let _ = writeln!(
                md,
                "status: {:?}, checks passed {}/{}, wall time {:.1} s\n",
                m.status, m.checks_passed, m.checks_total, m.wall_time_s
            );
            if let Some(e) = &m.error {
                let _ = writeln!(md, "error: {e}\n");
            }
            let preds = predictions(&run.spec, run.fprime0);
            if !preds.is_empty() {
                md.push_str(
                    "| quantity | predicted | measured | tol | verdict |\n|---|---|---|---|---|\n",
                );
            }
            for p in &preds {
                let v = measured(run, p);
                let pass = v.map(|v| (v / p.value - 1.0).abs() <= p.tolerance);
                let _ = writeln!(
                    md,
                    "| {} | {:.3} | {} | {:.0}% | {} |",
                    p.label,
                    p.value,
                    fmt_opt(v),
                    100.0 * p.tolerance,
                    match pass {
                        Some(true) => "pass",
                        Some(false) => "FAIL",
                        None => "missing",
                    }
                );
                rep.rows.push(ReportRow {
                    run: m.name.clone(),
                    label: p.label.clone(),
                    predicted: p.value,
                    measured: v,
                    tolerance: p.tolerance,
                    pass,
                });
            }
            md.push('\n');
            match &run.checks {
                Ok(checks) if !checks.is_empty() => {
                    md.push_str("checks:\n\n");
                    for c in checks {
                        let lambda = c
                            .params
                            .get("lambda")
                            .map(|l| format!(" lambda={l}"))
                            .unwrap_or_default();
                        let entry = c
                            .entry_time
                            .map(|t| format!(", entry t={t}"))
                            .unwrap_or_default();
                        let _ = writeln!(
                            md,
                            "- {}{lambda}: {}{entry}",
                            c.check,
                            if c.pass { "pass" } else { "FAIL" }
                        );
                    }
                    md.push('\n');
                }
                Ok(_) => {}
                Err(e) => {
                    let _ = writeln!(md, "checks missing: {e}\n");
                }
            }
            match (&run.trajectories, plot_dir) {
                (Ok(trajs), Some(d)) => {
                    let path = d.join(format!("{}_positions.csv", m.name));
                    write_plot(&path, trajs)?;
                    rep.plots.push(path);
                }
                (Err(e), _) => {
                    let _ = writeln!(md, "trajectories missing: {e}\n");
                }
                _ => {}
            }
        }
    }
    if !rep.warnings.is_empty() {
        md.push_str("## warnings\n\n");
        for w in &rep.warnings {
            let _ = writeln!(md, "- {w}");
        }
    }
    rep.markdown = md;
    Ok(rep)
}
