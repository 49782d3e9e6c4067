use thiserror::Error;

pub type Result<T, E = AmError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite loss at observation {index}")]
    NonFiniteLoss { index: usize },

    #[error("solver produced non-finite values at iteration {iteration}: {source}")]
    Diverged {
        iteration: usize,
        #[source]
        source: Box<AmError>,
    },

    #[error("bootstrap replicate {replicate} failed: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<AmError>,
    },

    #[error("replication {replication} failed: {source}")]
    Replication {
        replication: usize,
        #[source]
        source: Box<AmError>,
    },

    #[error("{method} did not converge within {iterations} sweeps")]
    NoConvergence { method: &'static str, iterations: usize },
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(AmError::DimensionMismatch { expected, actual })
    }
}
