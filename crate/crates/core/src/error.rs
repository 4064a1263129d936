use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("invalid parameter `{name}`: {constraint}")]
    InvalidParameter {
        name: &'static str,
        constraint: String,
    },

    /// The indicial equation has complex roots for this mode (the mode is not strictly stable).
    #[error("complex indicial roots: discriminant {discriminant} < 0")]
    ComplexRoots { discriminant: f64 },

    /// A point lies on a coordinate axis where the reduced equations are singular.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative or integration procedure failed to converge.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// A curve or graph has no usable portion for the requested operation.
    #[error("empty range: {0}")]
    EmptyRange(String),

    /// A requested radius or point lies outside the domain of a field or curve.
    #[error("out of domain: {0}")]
    OutOfDomain(String),

    /// Density centers are restricted to the origin and the two symmetry axes.
    #[error("unsupported density center: {0}")]
    UnsupportedCenter(String),

    /// Malformed serialized input.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, constraint: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        constraint: constraint.into(),
    }
}
