use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty vertex set")]
    EmptyVertexSet,

    #[error("not a spanning tree: {0}")]
    NotSpanningTree(String),

    #[error("invalid edge {{{0}, {1}}}")]
    InvalidEdge(u8, u8),

    #[error("cannot contract the pair {{{0}, {1}}}: endpoints must be distinct vertices of the tree")]
    InvalidPair(u8, u8),

    #[error("relabeling is not the order-preserving bijection onto 1..{0}")]
    NotOrderPreserving(u8),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("invariance violated: {0}")]
    InvarianceViolated(String),

    #[error("d∘d ≠ 0 for HH_{{{s},{t}}} at level {k} ({nonzero} nonzero entries)")]
    BoundaryNotSquareZero { s: usize, t: usize, k: usize, nonzero: usize },

    #[error("ambient dimension {dim} exceeds the oracle cap {cap}")]
    OracleCapExceeded { dim: usize, cap: usize },

    #[error("{0}")]
    Envelope(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed matrix file {path}: {msg}")]
    MatrixFormat { path: String, msg: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

impl Error {
    /// Errors that indicate a broken internal invariant rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::InvarianceViolated(_) | Error::BoundaryNotSquareZero { .. } | Error::NotSpanningTree(_)
        )
    }
}
