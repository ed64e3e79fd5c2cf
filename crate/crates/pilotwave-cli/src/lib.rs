//! Library surface of the scenario runner, shared by the binary and the
//! acceptance suite.

pub mod config;
pub mod report;
pub mod scenarios;

pub use config::{load_config, parse_config, ConfigError, ScenarioConfig, ScenarioSpec};
pub use report::{CheckResult, Comparison, RunReport};
pub use scenarios::{describe, run_config, SCENARIO_NAMES};

/// Process exit codes: 0 pass, 1 check failure, 2 validation error,
/// 3 numerical instability.
pub fn exit_code_for(error: &pilotwave::Error) -> i32 {
    match error {
        pilotwave::Error::Instability { .. } => 3,
        _ => 2,
    }
}
