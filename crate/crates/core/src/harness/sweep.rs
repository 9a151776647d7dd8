//! Independent experiments on a bounded worker pool.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{default_output_root, ExperimentConfig};
use super::run::{run_experiment_in, RunStatus};
use crate::error::{Error, Result};

/// A sweep file: experiments given inline or as paths relative to the file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub include: Vec<PathBuf>,
    #[serde(default)]
    pub experiments: Vec<ExperimentConfig>,
}

impl SweepConfig {
    /// Experiments in file order: inline ones first, then includes.
    pub fn load(path: &Path) -> Result<(Vec<ExperimentConfig>, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let cfg: SweepConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut exps = cfg.experiments;
        for inc in &cfg.include {
            exps.push(ExperimentConfig::load(&base.join(inc))?);
        }
        let root = cfg.output_dir.unwrap_or_else(default_output_root);
        Ok((exps, root))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub name: String,
    pub family: String,
    pub status: String,
    pub exit_code: i32,
    pub checks_total: usize,
    pub checks_passed: usize,
    /// `law:param=value` pairs joined by `;`.
    pub fits: String,
    pub error: String,
}

pub const SUMMARY: &str = "summary.csv";

/// Run every experiment under `root/<name>` with at most `workers` at once.
///
/// Rows come back in input order whatever the worker count. A failing
/// experiment yields an `error` row and does not affect the others.
pub fn sweep(cfgs: &[ExperimentConfig], root: &Path, workers: usize) -> Result<Vec<SweepRow>> {
    if cfgs.is_empty() {
        return Err(Error::Config("sweep needs at least one experiment".into()));
    }
    let mut names: Vec<&str> = cfgs.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!(
            "duplicate experiment name `{}`",
            w[0]
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    use rayon::prelude::*;
    let rows: Vec<SweepRow> =
        pool.install(|| cfgs.par_iter().map(|cfg| summarize(cfg, root)).collect());
    std::fs::create_dir_all(root)?;
    let mut w = csv::Writer::from_path(root.join(SUMMARY))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(rows)
}

fn summarize(cfg: &ExperimentConfig, root: &Path) -> SweepRow {
    let mut row = SweepRow {
        name: cfg.name.clone(),
        family: cfg.profile.family.as_str().into(),
        status: String::new(),
        exit_code: 1,
        checks_total: 0,
        checks_passed: 0,
        fits: String::new(),
        error: String::new(),
    };
    match run_experiment_in(cfg, &root.join(&cfg.name)) {
        Ok(out) => {
            row.status = match out.manifest.status {
                RunStatus::Passed => "passed",
                RunStatus::ChecksFailed => "checks_failed",
                RunStatus::Error => "error",
            }
            .into();
            row.exit_code = out.exit_code();
            row.checks_total = out.manifest.checks_total;
            row.checks_passed = out.manifest.checks_passed;
            row.fits = out
                .fits
                .iter()
                .flat_map(|f| {
                    f.params
                        .iter()
                        .map(move |(k, v)| format!("{}:{k}={v}", f.law))
                })
                .collect::<Vec<_>>()
                .join(";");
            row.error = out.manifest.error.unwrap_or_default();
        }
        Err(e) => {
            row.status = "error".into();
            row.error = e.to_string();
        }
    }
    row
}
