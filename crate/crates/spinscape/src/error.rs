use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// The requested computation exceeds a configured size limit.
    #[error("capacity exceeded: {what} needs N <= {limit}, got N = {n}; {hint}")]
    Capacity {
        what: &'static str,
        limit: usize,
        n: usize,
        hint: &'static str,
    },
    /// A value lies outside the domain of the transform.
    #[error("domain error: {0}")]
    Domain(String),
    /// A linear system had no unique solution.
    #[error("singular system: {0}")]
    Singular(String),
    /// A binary file could not be decoded.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}

pub(crate) fn check_capacity(
    what: &'static str,
    n: usize,
    limit: usize,
    hint: &'static str,
) -> Result<()> {
    if n > limit {
        Err(Error::Capacity { what, limit, n, hint })
    } else {
        Ok(())
    }
}
