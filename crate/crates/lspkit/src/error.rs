use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for mode {mode} of size {size}")]
    Bounds { mode: usize, index: usize, size: usize },

    #[error("coordinate {value} outside [{lower}, {upper}] in dimension {dim}")]
    Domain { dim: usize, value: f64, lower: f64, upper: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("skill library: {0}")]
    Library(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("value iteration step {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
