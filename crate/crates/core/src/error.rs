use thiserror::Error;

/// Errors produced by the spectral routines and the procedures built on them.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data (non-finite entries, asymmetric matrices, shape mismatch).
    #[error("invalid input: {0}")]
    Input(String),

    /// A documented precondition on sizes or parameters does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A matrix that must be nonsingular / positive definite is not.
    #[error("rank deficiency: {0}")]
    Rank(String),

    /// Argument outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid law or model parameter.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The statistic is ill-posed for this input (e.g. a zero hypothesis matrix).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An iterative or quadrature routine failed to reach its target.
    #[error("numerical failure: {message} (after {iterations} iterations)")]
    Numerical { message: String, iterations: usize },

    /// The Painlevé II integration left the Hastings–McLeod branch.
    #[error("unstable Painleve II branch: |q| exceeded bound at x = {x}")]
    UnstableBranch { x: f64 },

    /// Invalid experiment / ensemble / CLI configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn numerical(message: impl Into<String>, iterations: usize) -> Self {
        Error::Numerical {
            message: message.into(),
            iterations,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
