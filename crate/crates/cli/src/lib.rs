//! Command-line driver: configuration, subcommands, output artifacts and the
//! verification suite.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod verify;

pub use config::{Format, RunConfig};
pub use error::{CliError, CliResult};
