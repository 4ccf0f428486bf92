use thiserror::Error;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// A Laplace image returned a non-finite value at a Stehfest node.
    #[error("non-finite Laplace image at lambda = {lambda}")]
    NonFiniteImage { lambda: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    /// Assembly or time stepping produced something that should not happen.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("internal boundaries cross: {0}")]
    BoundaryCrossing(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True when the failure stems from bad input rather than the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Domain(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
