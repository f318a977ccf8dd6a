//! Command-line front end for the solver library: run configuration, file
//! formats (mesh text, legacy VTK, CSV reports) and the three subcommands.

use std::fmt;

pub mod commands;
pub mod config;
pub mod expr;
pub mod mesh_io;
pub mod report;
pub mod vtk;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process-level error classification: exit code 2 for input errors, 3 for
/// model errors, 4 for solver failures.
#[derive(Clone, Debug)]
pub enum CliError {
    Input(String),
    Model(String),
    Solver(String),
}

impl CliError {
    pub fn input(msg: String) -> Self {
        CliError::Input(msg)
    }

    pub fn model(msg: String) -> Self {
        CliError::Model(msg)
    }

    pub fn solver(msg: String) -> Self {
        CliError::Solver(msg)
    }

    pub fn model_from(e: impl fmt::Display) -> Self {
        CliError::Model(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Model(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Model(m) => write!(f, "model error: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Worker cap from `HMM_THREADS`; the current implementation is
/// single-threaded, so this only validates and clamps the request.
pub fn thread_cap() -> Result<usize, CliError> {
    match std::env::var("HMM_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => {
            let n = v
                .parse::<usize>()
                .map_err(|_| CliError::input(format!("HMM_THREADS must be a positive integer, got '{v}'")))?;
            if n == 0 {
                return Err(CliError::input("HMM_THREADS must be at least 1".into()));
            }
            Ok(n.min(1).max(1))
        }
    }
}
