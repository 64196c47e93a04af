use std::fmt;

use wow_core::Error;

/// Process exit status of a completed run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    PropertyFailure = 1,
}

impl ExitStatus {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            ExitStatus::Success
        } else {
            ExitStatus::PropertyFailure
        }
    }
}

/// A run that could not complete; `code` is 2 for input errors and 3 for
/// solver failures.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub const INPUT_ERROR: u8 = 2;
pub const SOLVER_ERROR: u8 = 3;

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: INPUT_ERROR,
            message: message.into(),
        }
    }

    pub fn solver(message: impl Into<String>) -> Self {
        CliError {
            code: SOLVER_ERROR,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Solver(_) | Error::TooLarge(_) | Error::Cholesky(_) => {
                CliError::solver(e.to_string())
            }
            _ => CliError::input(e.to_string()),
        }
    }
}
