//! Scenario files and their execution for the `plscape` command.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_config_str, parse_values, Geometry, Kind, Scenario};
pub use run::{exit_code, run_scenario, run_sweep, solve_scenario, Report, SweepReport};
