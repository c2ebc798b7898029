use thiserror::Error;

/// Errors raised by the sampler and its numerical building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A likelihood, density or integral produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Inputs are structurally inconsistent (lengths, grouping, missing pieces).
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
