//! Scenario files, artifact formats and subcommand drivers for `bendbeam-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use commands::{run, Command, Options, Outcome, SweepParam};
pub use config::ScenarioConfig;
pub use error::{CliError, Result};
