// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: argument parsing, run configurations and the
//! versioned artifact formats.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod files;

pub use commands::execute;
pub use config::RunConfig;
pub use error::{CliError, CliResult};
