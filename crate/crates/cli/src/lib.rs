//! Experiment driver: configuration, pipelines and report emission.

pub mod config;
pub mod report;
pub mod run;

pub use config::{load, ConfigError, ExperimentConfig};
pub use report::{Check, RunReport, Section};
pub use run::{run, RunError, Subcommand};
