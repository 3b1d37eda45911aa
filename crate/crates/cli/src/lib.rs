//! Library side of the `npr` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod ic_expr;
pub mod render;

pub use error::{CliError, Result};
