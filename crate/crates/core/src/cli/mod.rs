//! Experiment configuration, execution and output.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{load_config, parse_config, ConfigError, Experiment, ExperimentConfig, Overrides, Scenario};
pub use output::{format_number, trace_table, Report, Status, Table};
pub use runner::{execute, run_experiment, Outcome, RunError};
