use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dim { expected: usize, got: usize },
    #[error("input is {0:e} away from the projection manifold")]
    OffManifold(f64),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("stage {stage}: {msg}")]
    Stage { stage: &'static str, msg: String },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("training diverged at step {0}")]
    Diverged(usize),
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dim { expected, got })
    }
}
