use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid scene: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum TruthError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
