//! Batch front end: configuration, experiment commands and report emission.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver error,
//! 4 invariant failure.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("invariant failed: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

/// Library errors raised while solving; precondition failures stay config errors.
pub fn solver_err(e: ising_core::Error) -> CliError {
    use ising_core::Error as E;
    match e {
        E::Precondition(m) | E::Config(m) => CliError::Config(m),
        E::Dimension(d) => CliError::Config(format!("dimension {d} unsupported")),
        E::Invariant(m) => CliError::Invariant(m),
        other => CliError::Solver(other.to_string()),
    }
}
