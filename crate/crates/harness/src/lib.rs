//! Experiment harness: configuration, runs and sweeps, analysis and file output.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod emit;
pub mod error;
pub mod experiment;

pub use config::{ExperimentConfig, ResolvedConfig};
pub use error::{HarnessError, HarnessResult};
pub use experiment::{run_experiment, run_sweep, RunRecord};
