//! Error type shared by all solver and sampling routines.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs failed (bad mesh, bad exponent, domain
    /// mismatch, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A fixed-point iteration ran out of its iteration budget.
    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// The kernel diagonal is singular; the triangular collocation system
    /// cannot be solved.
    #[error("operator not invertible: {0}")]
    NotInvertible(String),

    /// Paired inputs that must satisfy a relation (e.g. y = h + V(w)) do not.
    #[error("inconsistent data: {0}")]
    InconsistentData(String),

    /// NaN or infinity showed up while evaluating the problem data.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// An operator family satisfies neither the exponential-decay nor the
    /// endpoint-contraction certificate.
    #[error("family is not stable: {0}")]
    NotStable(String),

    /// A funnel sampling run accepted zero samples.
    #[error("empty funnel: all {0} sample runs were rejected")]
    EmptyFunnel(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
