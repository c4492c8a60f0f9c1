use thiserror::Error;

/// Errors produced by the coverage and diversity analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a formula (negative distance,
    /// distance below the reference distance, zero frequency, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit error: {0}")]
    Fit(String),

    /// Structured input failed validation. `path` names the offending key.
    #[error("invalid input at `{path}`: {message}")]
    Invalid { path: String, message: String },

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("missing reception record for link {ue} <- {bs}")]
    MissingRecord { ue: String, bs: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True when the error was caused by user-supplied input rather than an
    /// internal failure (I/O on the output side, serialization bugs).
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
