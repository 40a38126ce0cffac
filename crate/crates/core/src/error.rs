use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical procedure failed (non-convergence, underflow).
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A model, prior, or table failed validation.
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unknown model `{name}` (registered: {known})")]
    UnknownModel { name: String, known: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for numerical failures, as opposed to usage or input errors.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
