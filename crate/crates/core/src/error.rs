use thiserror::Error;

use crate::lattice::Vertex;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("vertex ({}, {}) lies outside the window of half-width {half_width}", .vertex.x, .vertex.y)]
    OutsideWindow { vertex: Vertex, half_width: i32 },
    #[error("{edges} edges exceed the enumeration limit of {limit}")]
    Capacity { edges: usize, limit: usize },
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
    #[error("no connection observed at k = {k}; raise the trial count")]
    InsufficientTrials { k: u32 },
    #[error("rejection sampler gave up after {attempts} attempts")]
    RejectionExhausted { attempts: u64 },
    #[error("ray at angle {angle} does not meet the circuit")]
    RayMiss { angle: f64 },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
