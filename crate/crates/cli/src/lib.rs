//! Command-line experiment runner for the `thermoacoustic` crate.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;

pub use error::{CliError, Result};
