//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by scenario construction, solvers and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or scenario parameter.
    #[error("configuration error: {0}")]
    Config(String),

    /// Geometry that leaves an angle or distance undefined.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// An index outside the valid range of a collection.
    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    /// BIA needs at least two reception states per user.
    #[error("BIA transmission block requires L >= 2 (got L = {0})")]
    UnsupportedBlock(usize),

    /// Transmission block would exceed the configured slot cap.
    #[error("transmission block for L = {l}, G = {g} exceeds {cap} slots")]
    BlockTooLarge { l: usize, g: usize, cap: usize },

    /// A matrix that must be positive definite is not.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// User classification produced an unusable partition.
    #[error("classification produced an empty class: {0}")]
    EmptyClass(String),

    /// Every cell of the allocation tables is masked or infeasible.
    #[error("no feasible network solution under the given constraints")]
    NoFeasibleSolution,

    /// I/O with path context.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Config (de)serialization failure.
    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
