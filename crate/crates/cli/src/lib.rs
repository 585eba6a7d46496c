//! Configuration, experiment runners and subcommands for the `ngev` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;

pub use config::{RunConfig, Solver};
pub use error::{CliError, Result};
