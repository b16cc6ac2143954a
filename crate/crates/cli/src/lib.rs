//! Experiment harness for the strong maximum principle: named scenarios,
//! JSON configuration, and report/CSV output.

pub mod config;
pub mod error;
pub mod report;
mod scenarios;
pub mod shapes;

use std::time::{SystemTime, UNIX_EPOCH};

pub use config::{ExperimentConfig, Scenario, Setup, Tolerances};
pub use error::LabError;
pub use report::{emit_report, ExperimentReport, Table};
pub use shapes::Shape;

/// Resolves defaults, runs the scenario and stamps the report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, LabError> {
    let setup = config.resolve()?;
    let mut report = scenarios::run(&setup)?;
    report.timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    Ok(report)
}
