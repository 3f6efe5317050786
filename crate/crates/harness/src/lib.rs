//! Experiment orchestration for sigre: TOML-configured benchmark grids,
//! reference posteriors, resumable result persistence and reports.

pub mod config;
pub mod experiment;
pub mod io;
pub mod reference;
pub mod report;
pub mod seeds;

pub use config::{ExperimentConfig, KernelChoice, MethodSpec};
pub use experiment::{run_experiment, run_experiment_with_cache, ExperimentOutcome, ResultRecord};
pub use report::emit_report;
