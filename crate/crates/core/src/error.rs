use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("unsupported process: {0}")]
    UnsupportedSpec(String),
    #[error("insufficient coverage: index {needed} required, {available} available")]
    Coverage { needed: usize, available: usize },
    #[error("refused: {0}")]
    Refused(String),
    #[error("no closed form: {0}")]
    NoClosedForm(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
