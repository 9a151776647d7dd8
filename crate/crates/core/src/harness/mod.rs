//! Configuration, experiment runs, sweeps and reports.

pub mod config;
pub mod report;
pub mod run;
pub mod sweep;

pub use config::{CheckSpec, ExperimentConfig, NonlinearitySpec, OUTPUT_ROOT_ENV};
pub use report::{predictions, report, Prediction, Report};
pub use run::{check_kpp, run_experiment, run_experiment_in, Manifest, RunOutcome, RunStatus};
pub use sweep::{sweep, SweepConfig, SweepRow};
