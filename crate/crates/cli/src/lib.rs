//! Batch front end: scenario files, the quadrotor comparison table, the
//! scalar positivity demo and step-size convergence studies.

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;
pub mod pipeline;

pub use commands::{cmd_convergence, cmd_run, cmd_scalar_demo, cmd_table2};
pub use config::{ModelKind, Scenario, ScenarioConfig, Strategy};
pub use error::{CliError, CliResult};
pub use pipeline::{run_config, RunOutput, RunSummary, Scheme, TABLE2_SCHEMES};
