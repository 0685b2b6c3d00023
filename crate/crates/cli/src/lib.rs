//! Command implementations behind the `seaspring` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

use seaspring_core::error::Error as CoreError;
use seaspring_core::solver::Status;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_INPUT: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) => EXIT_SOLVER,
            // malformed data, bad parameters and unwritable paths alike
            CliError::Input(_) | CliError::Io(_) | CliError::Core(_) => EXIT_INPUT,
        }
    }
}

/// Exit code for a finished solve.
pub fn status_exit_code(status: Status) -> i32 {
    match status {
        Status::Optimal => EXIT_OK,
        Status::Infeasible => EXIT_INFEASIBLE,
        Status::MaxIter | Status::Unbounded => EXIT_SOLVER,
    }
}
