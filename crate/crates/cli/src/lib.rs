//! Command-line front end: run configuration, CSV export and the
//! subcommands behind the `vfd` binary.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;

pub use config::RunConfig;
pub use error::{CliError, Result};
