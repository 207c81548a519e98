//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any fslbm operation.
#[derive(Debug, Error)]
pub enum Error {
    /// Codeword width outside the supported 1..=32 range.
    #[error("codeword width {0} out of range (1..=32)")]
    InvalidWidth(u32),

    /// Two codewords of different widths were combined.
    #[error("codeword widths differ: {left} vs {right}")]
    WidthMismatch { left: u8, right: u8 },

    /// A Hamming radius larger than the codeword width.
    #[error("radius {radius} exceeds codeword width {width}")]
    RadiusTooLarge { radius: u8, width: u8 },

    /// Integer overflow while computing a count.
    #[error("count overflow while computing {0}")]
    CountOverflow(&'static str),

    /// A codeword string could not be parsed.
    #[error("cannot parse codeword {text:?}: {reason}")]
    BadCodeword { text: String, reason: String },

    /// Normalization of an all-zero weight vector.
    #[error("label weights are all zero, cannot normalize")]
    EmptyDistribution,

    /// A probability vector violating the distribution invariants.
    #[error("invalid distribution: {0}")]
    BadDistribution(String),

    /// Class count outside 2..=65535.
    #[error("class count {0} out of range (2..=65535)")]
    BadClassCount(usize),

    /// Mixed class counts in one operation.
    #[error("class count mismatch: expected {expected}, got {got}")]
    ClassMismatch { expected: usize, got: usize },

    /// Non-positive or non-finite zeta increment.
    #[error("zeta increment must be positive and finite, got {0}")]
    BadZeta(f64),

    /// Not enough candidate rules to fill a template.
    #[error("need {need} meta-feature rules but only {have} candidates supplied")]
    InsufficientCandidates { have: usize, need: usize },

    /// A rule references a column the record does not have.
    #[error("rule {rule} references column {column} but record has {available} columns")]
    MissingColumn {
        rule: usize,
        column: usize,
        available: usize,
    },

    /// A named column is absent from the input header.
    #[error("column {0:?} not found in input header")]
    UnknownColumn(String),

    /// Projected memory use exceeds the configured budget.
    #[error("projected memory {required} bytes exceeds budget {budget} bytes")]
    BudgetExceeded { required: u64, budget: u64 },

    /// Evaluation over an empty test set.
    #[error("test set is empty")]
    EmptyTestSet,

    /// Line-oriented input that failed to parse.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Model stream with the wrong magic bytes.
    #[error("bad magic bytes (not a model file)")]
    BadMagic,

    /// Model stream written by an unknown format version.
    #[error("unsupported model version {0}")]
    UnsupportedVersion(u8),

    /// Model stream shorter than its declared contents.
    #[error("model data truncated")]
    Truncated,

    /// Model stream whose CRC does not match its contents.
    #[error("model checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    /// Structurally invalid model contents.
    #[error("corrupt model: {0}")]
    CorruptModel(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
