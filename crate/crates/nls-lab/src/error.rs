use thiserror::Error;

/// Error type shared across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or malformed.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called with incompatible arguments (mismatched
    /// grids, wrong sector, unsupported coefficient, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A numerical routine failed to converge or produced garbage
    /// (eigensolver breakdown, Newton divergence, step collapse).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A quantity that the model guarantees came out wrong. This signals a
    /// discretization or implementation bug, not a bad input.
    #[error("property failure: {0}")]
    PropertyFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
    pub fn property(msg: impl Into<String>) -> Self {
        Error::PropertyFailure(msg.into())
    }
}
