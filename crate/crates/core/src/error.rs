use thiserror::Error;

pub type Result<T, E = FadError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FadError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numeric divergence at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    /// The all-zero bounded curve case, which FAD analysis does not score.
    #[error("excluded case: {0}")]
    Excluded(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FadError {
    /// True for failures caused by floating-point breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, FadError::Divergence { .. })
    }
}
