use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed CSV at line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: row {row} has {found} columns, expected {expected}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("{path}: missing value at row {row}, column {column}")]
    MissingValue {
        path: PathBuf,
        row: usize,
        column: usize,
    },

    #[error("{path}: label column {column} not found")]
    LabelColumnMissing { path: PathBuf, column: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("{name} must be in {expected}, got {value}")]
    OutOfRange {
        name: &'static str,
        expected: &'static str,
        value: String,
    },

    #[error("class {class} has {count} samples, need at least {needed}")]
    ClassTooSmall {
        class: usize,
        count: usize,
        needed: usize,
    },

    #[error("operation requires a binary dataset, got {0} classes")]
    NotBinary(usize),

    #[error("cannot fit a tree on an empty sample set")]
    EmptySample,

    #[error("row has {found} features, model expects {expected}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("class counts are all zero")]
    ZeroCounts,

    #[error("ROC AUC is undefined when truth contains a single class")]
    SingleClass,

    #[error("need at least {needed} learners, got {found}")]
    TooFewLearners { needed: usize, found: usize },

    #[error("bag has no cached correctness mask")]
    MissingCorrectness,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot parse tree text at line {line}: {message}")]
    TreeParse { line: usize, message: String },
}
