// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use drayage_core::Error as CoreError;
use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    /// 2 for validation errors, 3 for solver failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::Structural(_) | CoreError::Validation(_)) | CliError::Invalid(_) => 2,
            CliError::Core(CoreError::Infeasible(_) | CoreError::Solver(_)) => 3,
            CliError::Io(_) => 4,
        }
    }
}
