use thiserror::Error;

use crate::config::ConfigError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),

    /// A closed form was requested outside the regime where it holds.
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("integral diverges: {0}")]
    Divergent(String),

    /// Zero-forcing needs strictly more antennas than pilots.
    #[error("zero-forcing requires M > K (got M = {antennas}, K = {pilots})")]
    TooFewAntennas { antennas: usize, pilots: usize },

    #[error("pilot index {index} out of range for K = {pilots}")]
    PilotOutOfRange { index: usize, pilots: usize },

    #[error("degenerate receiver input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
