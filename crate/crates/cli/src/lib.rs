//! The `refracted` command-line tool: model and scenario files, validation
//! suites comparing independent routes to the same quantity, and
//! reproducible JSON/CSV reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod suites;

pub use commands::{execute, run, Cli, Command, Common};
pub use config::{
    load_model, parse_model, ExitCase, McSettings, ModelFile, Scenario, Suite, Tolerances,
};
pub use error::{CliError, Result};
pub use report::{emit_report, render, CheckRecord, Format};
pub use suites::run_suite;
