use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An iterative solver ran out of iterations. `last` holds the final iterate.
    #[error("iteration limit of {iterations} reached in {context}")]
    IterationLimit {
        context: &'static str,
        iterations: usize,
        last: Vec<f64>,
    },

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergence at step {step}: objective is {value}")]
    Divergence { step: usize, value: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
