use thiserror::Error;

/// Errors raised by the simulation and oracle routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the region where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Structurally invalid input (bad sizes, mismatched states, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// An exhaustive computation was asked for an instance it cannot enumerate.
    #[error("instance too large: {0}")]
    TooLarge(String),
    /// A runtime invariant check failed.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
