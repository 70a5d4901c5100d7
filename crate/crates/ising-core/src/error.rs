use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice dimension {0} unsupported (need 2 <= d <= 4)")]
    Dimension(usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("brute force guard: {0} free sites exceeds the limit of {1}")]
    Guard(usize, usize),
    #[error("invariant failed: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
