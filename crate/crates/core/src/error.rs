use thiserror::Error;

/// Errors produced by the preprocessing pipeline.
///
/// The variants map onto the CLI exit codes: configuration errors exit
/// with 2, invariant violations with 3, and communication protocol
/// errors with 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user input: mesh parameters, geometry definitions,
    /// material maps, rank grids, or malformed input files.
    #[error("configuration error: {0}")]
    Config(String),

    /// An internal consistency check failed. This indicates either a
    /// geometric edge case the tolerances could not absorb or a bug;
    /// the message names the offending entity.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// The simulated inter-rank communication failed to resolve a
    /// request, e.g. an owner could not identify an entity payload.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    /// Process exit code associated with this error kind.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Invariant(_) => 3,
            Error::Protocol(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
