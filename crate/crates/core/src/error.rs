use thiserror::Error;

use crate::minimizer::{DiscreteField, SolveReport};

/// Errors produced by the solver and its diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A geometry or configuration failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// A numerical routine failed in a way its preconditions should rule out.
    #[error("internal error: {0}")]
    Internal(String),

    /// A column of the stream function decreases by more than the tolerance.
    #[error("column {column} (x1 = {x1}) is not monotone in x2: drop of {drop:e}")]
    NonMonotone { column: usize, x1: f64, drop: f64 },

    /// The minimizer hit `max_iter` before reaching the stopping threshold.
    /// The last iterate and the full trace are kept for inspection.
    #[error(
        "minimizer did not converge after {} iterations (projected gradient {:e})",
        .0.report.iterations,
        .0.report.projected_gradient
    )]
    NotConverged(Box<Unconverged>),
}

/// The state carried by [`Error::NotConverged`].
#[derive(Debug)]
pub struct Unconverged {
    pub field: DiscreteField,
    pub report: SolveReport,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
