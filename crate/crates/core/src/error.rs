use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, lengths or hyperparameters that cannot work together.
    #[error("configuration error: {0}")]
    Config(String),

    /// An API was called in a way its contract forbids.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    /// A value outside the domain of an operation (non-finite samples, zero denominators).
    #[error("invalid value: {0}")]
    InvalidValue(String),

    /// The dataset does not carry what the chosen architecture needs.
    #[error("incompatible dataset: {0}")]
    Incompatible(String),

    /// Training diverged.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A file could not be parsed.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}
