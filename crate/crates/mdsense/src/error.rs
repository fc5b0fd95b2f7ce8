use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("detection failed: {0}")]
    Detection(String),

    #[error("unsupported mode: {0}")]
    Unsupported(String),

    #[error("singular system ({context}): pivot {pivot:e} at row {row}, condition estimate {condition:e}")]
    Singular {
        context: &'static str,
        row: usize,
        pivot: f64,
        condition: f64,
    },

    #[error("iteration diverged at step {iteration}: {what}")]
    Divergence { iteration: usize, what: String },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("malformed input at byte offset {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
