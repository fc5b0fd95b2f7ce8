//! Command-line front end for `mdsense`: configuration and subcommands.

pub mod commands;
pub mod config;
pub mod error;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
