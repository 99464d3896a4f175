use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("a positive finding cannot be combined with No Finding")]
    ConflictingFindings,
    #[error("bad kind proportions: {0}")]
    BadProportions(String),
    #[error("case sections are empty")]
    EmptySections,
    #[error("generation client failed: {message} (prompt: {prompt:?})")]
    ClientFailure { message: String, prompt: String },
    #[error("bad corpus: {0}")]
    BadCorpus(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad corpus record: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SynthError>;
