use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the estimators and the ingestion layer.
///
/// Input errors (bad files, invalid arguments, schema problems) are kept
/// apart from estimation errors (degenerate data, singular fits) so callers
/// such as the CLI can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("schema mismatch: column `{column}` {problem}")]
    Schema { column: String, problem: String },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("singular information matrix: {0}")]
    Singular(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::Schema { .. } | Error::Parse { .. } | Error::Io(_) | Error::Csv(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
