//! Command-line front end: configuration, dispatch and run reports.

pub mod config;
pub mod error;
pub mod report;
pub mod run;
pub mod verify;

pub use config::{resolve, Cli, ExperimentConfig};
pub use error::CliError;
pub use report::{emit_report, load_report, ReportRecord};
pub use run::run_experiment;
