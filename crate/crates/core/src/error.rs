use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("value {value} lies outside [-{bound}, {bound}]")]
    OutOfRange { value: f64, bound: f64 },

    #[error("invalid input: {0}")]
    Domain(String),

    #[error("invalid weight vector: {0}")]
    InvalidWeights(String),

    #[error("relative entropy is infinite: q[{index}] > 0 while p[{index}] = 0")]
    InfiniteDivergence { index: usize },

    #[error("state error: {0}")]
    State(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { expected, actual })
    }
}
