use std::io;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violated an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A de-emphasis tap with |tap| >= 1 would make the IIR filter unstable.
    #[error("de-emphasis tap {0} is outside the stable range |tap| < 1")]
    UnstableTap(f64),

    /// The cubic solver found no sign change on the search bracket. This
    /// cannot happen for in-range (gamma, rho) and signals a bug rather
    /// than bad input.
    #[error("no sign change on the root bracket for gamma={gamma}, rho={rho}")]
    NoBracket { gamma: f64, rho: f64 },

    #[error("malformed WAV data: {0}")]
    MalformedWav(String),

    #[error("malformed table CSV: {0}")]
    MalformedTable(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
