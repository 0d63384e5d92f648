use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("record {record} has dimension {found}, first record has {expected}")]
    InconsistentRecord {
        record: usize,
        expected: usize,
        found: usize,
    },

    #[error("truncated record {record}")]
    TruncatedRecord { record: usize },

    #[error("file contains no records")]
    NoRecords,

    #[error("value {value} at index {index} is not representable as {kind}")]
    Unrepresentable {
        kind: &'static str,
        index: usize,
        value: f64,
    },

    #[error("need at least {needed} training points, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate edge between centroids {from} and {to} (zero length)")]
    DegenerateEdge { from: usize, to: usize },

    #[error("invalid centroid id {id} (codebook has {k})")]
    InvalidCentroid { id: usize, k: usize },

    #[error("bad magic: not an index file")]
    BadMagic,

    #[error("unsupported index version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated payload")]
    Truncated,

    #[error("corrupt index: {0}")]
    Corrupt(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
