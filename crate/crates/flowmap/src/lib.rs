//! Experiment runner for flow-map learning: configuration, file formats
//! and the `flowmap` command-line tool.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod expr;
pub mod io;

pub use error::{CliError, Result};
