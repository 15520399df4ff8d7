//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the corpus, similarity, spectral and clustering modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid stoplist entry {entry:?}: {message}")]
    BadStoplistEntry { entry: String, message: String },

    #[error("invalid {name}: {message}")]
    InvalidParameter {
        name: &'static str,
        message: String,
    },

    #[error("window list is empty")]
    EmptyWindowList,

    #[error("windows mix targets {expected:?} and {found:?}")]
    MixedTargets { expected: String, found: String },

    #[error("window for {target:?} has {len} tokens, expected {expected}")]
    BadWindowLength {
        target: String,
        len: usize,
        expected: usize,
    },

    #[error("window center is {found:?}, expected target {target:?}")]
    MisplacedTarget { target: String, found: String },

    #[error("word {word:?} is not in the vocabulary")]
    WordNotInVocabulary { word: String },

    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("bag for {label:?} has zero squared norm")]
    ZeroDiagonal { label: String },

    #[error("need at least 2 bags, got {n}")]
    TooFewBags { n: usize },

    #[error("need at least 2 objects to cluster, got {n}")]
    TooFewObjects { n: usize },

    #[error("bag for {label:?} has total {found}, expected {expected} (null model requires equal bag totals)")]
    UnequalBagTotals {
        label: String,
        found: u64,
        expected: u64,
    },

    #[error("matrix is not symmetric: |S[{row}][{col}] - S[{col}][{row}]| = {asymmetry:.3e}")]
    NotSymmetric {
        row: usize,
        col: usize,
        asymmetry: f64,
    },

    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("eigenvalue {value:.6e} below PSD tolerance {threshold:.6e}: input is not a valid Gram matrix")]
    NotPositiveSemidefinite { value: f64, threshold: f64 },

    #[error("similarity S[{row}][{col}] = {value} outside [0, 1]")]
    SimilarityOutOfRange { row: usize, col: usize, value: f64 },

    #[error("matrix value at [{row}][{col}] violates {expected}: {value}")]
    BadMatrixValue {
        row: usize,
        col: usize,
        value: f64,
        expected: &'static str,
    },

    #[error("rank range [{lo}, {hi}] is invalid for {len} entries (need at least 2 points)")]
    BadRankRange { lo: usize, hi: usize, len: usize },

    #[error("embedding dimension m = {m} out of range 1..={n}")]
    DimensionOutOfRange { m: usize, n: usize },

    #[error("cluster count k = {k} out of range 1..={n}")]
    ClusterCountOutOfRange { k: usize, n: usize },

    #[error("target {target:?} is not a single token: {message}")]
    BadTarget { target: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn read(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Read {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn write(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Write {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
