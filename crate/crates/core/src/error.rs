use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by swarm generation, attack injection, problem assembly and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("uav id {id} out of range for a swarm of {n}")]
    IdOutOfRange { id: usize, n: usize },

    #[error("invalid malicious count {m} for a swarm of {n}")]
    InvalidCount { m: usize, n: usize },

    #[error("attacker sets overlap on uav {0}")]
    OverlappingSets(usize),

    #[error("collusion target {0} must be benign")]
    TargetNotBenign(usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("empty sub-network")]
    EmptySubNetwork,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
