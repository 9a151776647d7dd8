use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use kpplab_core::fronts::{decay_rate, minimal_speed, solve_profile};
use kpplab_core::harness::{self, run::read_trajectories, ExperimentConfig, SweepConfig};
use kpplab_core::levelsets::fit_growth_law;
use kpplab_core::{GrowthLaw, Nonlinearity};
use serde_json::json;

/// Fisher-KPP experiments with slowly decaying initial data.
#[derive(Parser)]
#[command(name = "kpplab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        /// Run directory; defaults to the config's `output_dir`, else `$KPPLAB_OUTPUT_ROOT/<name>`.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a list of experiments on a worker pool.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        /// Root directory; each experiment writes to `<output>/<name>`.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(short, long, default_value_t = 1)]
        workers: usize,
    },
    /// Compute the traveling front of speed `c` for the logistic term.
    Front {
        #[arg(long)]
        speed: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        /// CSV file for the sampled profile.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fit a growth law to one level of a trajectories CSV.
    Fit {
        #[arg(short, long)]
        input: PathBuf,
        /// linear, t_log_t, power, exponential or double_exponential
        #[arg(long)]
        law: GrowthLaw,
        #[arg(long)]
        lambda: f64,
        #[arg(long, num_args = 2, value_names = ["T_A", "T_B"])]
        window: Vec<f64>,
    },
    /// Check the KPP envelopes, and the profile's slow decay when a config is given.
    CheckKpp {
        #[arg(short, long, conflicts_with = "r")]
        config: Option<PathBuf>,
        #[arg(long)]
        r: Option<f64>,
    },
    /// Markdown report over run directories.
    Report {
        dirs: Vec<PathBuf>,
        /// Markdown file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Directory for the plot-ready position CSVs.
        #[arg(long)]
        plots: Option<PathBuf>,
    },
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn status_code(failed: bool) -> ExitCode {
    ExitCode::from(if failed { 2 } else { 0 })
}

fn execute(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run { config, output } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = output.unwrap_or_else(|| cfg.output_dir());
            let out = harness::run_experiment_in(&cfg, &dir)?;
            let m = &out.manifest;
            println!(
                "{}: {:?}, checks {}/{} passed, {:.1} s -> {}",
                m.name,
                m.status,
                m.checks_passed,
                m.checks_total,
                m.wall_time_s,
                dir.display()
            );
            for c in out.checks.iter().filter(|c| !c.pass) {
                println!("  failed: {} {:?}", c.check, c.params);
            }
            if let Some(e) = &m.error {
                eprintln!("error: {e}");
            }
            Ok(ExitCode::from(out.exit_code() as u8))
        }
        Command::Sweep {
            config,
            output,
            workers,
        } => {
            let (cfgs, root) = SweepConfig::load(&config)?;
            let root = output.unwrap_or(root);
            let rows = harness::sweep(&cfgs, &root, workers)?;
            for r in &rows {
                println!(
                    "{:<24} {:<14} {:<14} {}/{} {}",
                    r.name, r.family, r.status, r.checks_passed, r.checks_total, r.error
                );
            }
            println!("summary: {}", root.join(harness::sweep::SUMMARY).display());
            let code = rows
                .iter()
                .map(|r| r.exit_code)
                .fold(0, |acc, c| match (acc, c) {
                    (1, _) | (_, 1) => 1,
                    (2, _) | (_, 2) => 2,
                    _ => 0,
                });
            Ok(ExitCode::from(code as u8))
        }
        Command::Front { speed, r, output } => {
            let nl = Nonlinearity::logistic(r)?;
            let f = solve_profile(speed, &nl)?;
            if let Some(path) = &output {
                let file = fs::File::create(path).with_context(|| path.display().to_string())?;
                f.write_csv(file)?;
            }
            print_json(&json!({
                "c": f.c,
                "c_star": minimal_speed(&nl),
                "alpha_c": f.alpha_c,
                "decay_rate": decay_rate(speed, &nl)?,
                "residual": f.residual,
                "monotone": f.monotone,
                "samples": f.z.len(),
            }))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit {
            input,
            law,
            lambda,
            window,
        } => {
            let trajs = read_trajectories(&input)?;
            let Some(tr) = trajs.iter().find(|t| (t.lambda - lambda).abs() < 1e-12) else {
                let have: Vec<f64> = trajs.iter().map(|t| t.lambda).collect();
                bail!(
                    "level {lambda} not in {} (levels {have:?})",
                    input.display()
                );
            };
            let fit = fit_growth_law(tr, law, [window[0], window[1]])?;
            print_json(&serde_json::to_value(&fit)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckKpp { config, r } => {
            let reports = match config {
                Some(path) => {
                    let cfg = ExperimentConfig::load(&path)?;
                    let (p, nl) = cfg.resolve_profile()?;
                    harness::check_kpp(&nl, Some(&p))
                }
                None => harness::check_kpp(&Nonlinearity::logistic(r.unwrap_or(1.0))?, None),
            };
            print_json(&serde_json::to_value(&reports)?)?;
            Ok(status_code(reports.iter().any(|c| !c.pass)))
        }
        Command::Report {
            dirs,
            output,
            plots,
        } => {
            let rep = harness::report(&dirs, plots.as_deref())?;
            match &output {
                Some(path) => {
                    fs::write(path, &rep.markdown).with_context(|| path.display().to_string())?
                }
                None => print!("{}", rep.markdown),
            }
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            Ok(status_code(rep.rows.iter().any(|r| r.pass == Some(false))))
        }
    }
}

fn main() -> ExitCode {
    // usage errors exit with 1; 2 is reserved for failed checks
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
