//! Command-line driver and annotation service.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod service;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
