use std::io;

use thiserror::Error;

use crate::partition::{CuGeometry, SplitType};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported block size {0}")]
    UnsupportedBlockSize(usize),

    #[error("invalid CU geometry {0}")]
    InvalidGeometry(String),

    #[error("split {split:?} is not legal for {geometry}")]
    IllegalSplit {
        geometry: CuGeometry,
        split: SplitType,
    },

    #[error("partition tree must be rooted at the full 64x64 block, got {0}")]
    NotRootTree(CuGeometry),

    #[error("qp {0} outside [0, 51]")]
    QpOutOfRange(i32),

    #[error("unsupported transform size {0}x{1}")]
    BadTransformSize(usize, usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("malformed split distribution at {geometry}: {reason}")]
    MalformedDistribution { geometry: CuGeometry, reason: String },

    #[error("invalid top-N configuration: {0}")]
    InvalidTopN(String),

    #[error("invalid network spec: {0}")]
    InvalidNetSpec(String),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("file truncated while reading {0}")]
    Truncated(&'static str),

    #[error("corrupt data: {0}")]
    Corrupt(String),

    #[error("missing model block for CU size {0}")]
    MissingSizeBlock(String),

    #[error("invalid PGM: {0}")]
    Pgm(String),

    #[error("invalid metric input: {0}")]
    Metric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("evaluation corpus overlaps training corpus: {0}")]
    CorpusOverlap(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
