use thiserror::Error;

/// Errors produced by the simulation and analysis pipelines.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain where a formula is valid.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or invalid configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An iterative solver stopped without meeting its tolerance.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// Data that cannot be analysed (too short, below the noise floor, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// A requested operating point lies outside the feasible region.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
