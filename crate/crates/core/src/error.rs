use thiserror::Error;

/// Errors raised by the library.
///
/// Variants are grouped so a front end can map them onto stable exit codes:
/// input and shape problems, domain violations of an operator, and
/// degenerate spectra that make a derivative ill-defined.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("degenerate spectrum: {0}")]
    Degenerate(String),

    #[error("malformed {source_name} at row {row}, column {column}: {message}")]
    Parse {
        source_name: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn shape<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
