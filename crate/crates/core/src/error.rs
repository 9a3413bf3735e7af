use thiserror::Error;

/// Errors raised by the library, grouped by the kind of failure so the CLI
/// can map each class to a distinct exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration: unknown columns, malformed mappings, invalid keys.
    #[error("configuration error: {0}")]
    Config(String),
    /// Bad data: unparseable rows, non-binary treatment, empty input.
    #[error("data error: {0}")]
    Data(String),
    /// A first-stage fit could not be carried out (e.g. a fold complement
    /// with no treated units).
    #[error("estimation error: {0}")]
    Estimation(String),
    /// A quantity left its numeric domain (zero mean, non-positive outcome
    /// where a log/power transform is required).
    #[error("numeric error: {0}")]
    Numeric(String),
    /// An argument violated a precondition (L > n, empty grid, n < 2).
    #[error("argument error: {0}")]
    Argument(String),
}

impl Error {
    /// Process exit code used by the CLI; 0 is reserved for success.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) => 3,
            Error::Estimation(_) => 4,
            Error::Numeric(_) => 5,
            Error::Argument(_) => 6,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
