use std::path::PathBuf;

use thiserror::Error;

/// Why an amplitude encoding could not be built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingFailure {
    ZeroNorm,
    Overflow,
}

impl std::fmt::Display for EncodingFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EncodingFailure::ZeroNorm => f.write_str("input vector has zero norm"),
            EncodingFailure::Overflow => f.write_str("input vector longer than 2^n_qubits"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {0} outside supported range 1..={max}", max = crate::statesim::MAX_QUBITS)]
    Capacity(usize),
    #[error("{gate} expects {expected} angle(s), got {got}")]
    Arity {
        gate: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid qubit index: {0}")]
    Index(String),
    #[error("encoding error: {0}")]
    Encoding(EncodingFailure),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid channel: {0}")]
    Channel(String),
    #[error("cannot split {n} observations into {k} folds")]
    Split { n: usize, k: usize },
    #[error("zero variance of loss differential with non-zero mean {mean_diff}")]
    DegenerateVariance { mean_diff: f64 },
    #[error("invalid model or generator spec: {0}")]
    Spec(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric cell at row {row}, column `{col}`: {value:?}")]
    NonNumericCell {
        row: usize,
        col: String,
        value: String,
    },
    #[error("empty file: {0}")]
    EmptyFile(PathBuf),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
