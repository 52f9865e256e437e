use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The variants map one-to-one onto the CLI exit codes, so callers can tell
/// a bad input apart from an exhausted budget or a solver that stalled.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An enumeration would exceed the configured size budget.
    #[error("resource budget exceeded: {what} needs {needed} items, budget is {budget}")]
    Resource {
        what: &'static str,
        needed: f64,
        budget: f64,
    },

    /// The constraint set of an optimization problem is empty.
    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    /// An iterative solver hit its iteration cap.
    #[error("{stage} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Malformed textual input.
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
