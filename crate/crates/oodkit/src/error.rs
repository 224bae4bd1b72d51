//! Unified error type for the toolkit.
//!
//! One enum covers every module so that callers (in particular the CLI) can
//! map errors onto a small set of documented exit-code classes: I/O, data
//! shape/content, configuration, and domain preconditions.

use std::path::PathBuf;

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Every error the toolkit can produce.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying filesystem failure (open/read/write/create).
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file's leading bytes do not form a valid header for its format
    /// (bad magic, unsupported version/dtype, truncated payload, empty CSV).
    #[error("malformed header in {path}: {detail}")]
    MalformedHeader { path: PathBuf, detail: String },

    /// A CSV data row has a different number of fields than the header.
    #[error("ragged row {row} in {path}: expected {expected} fields, found {found}")]
    RaggedRows {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    /// A NaN or infinity where only finite values are allowed.
    #[error("non-finite value at {context}")]
    NonFiniteValue { context: String },

    /// Declared dimensions overflow the address space.
    #[error("dimensions {rows} x {cols} overflow addressable memory")]
    DimensionOverflow { rows: u64, cols: u64 },

    /// A field failed to parse as the expected scalar type.
    #[error("parse failure in {path} line {line}: {detail}")]
    ParseFailure {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    /// Class labels must be non-negative integers.
    #[error("negative label {value} in {path} line {line}")]
    NegativeLabel {
        path: PathBuf,
        line: usize,
        value: i64,
    },

    /// A label index is not a valid class under the paired K-class set.
    #[error("label {label} at row {index} out of range for {k} classes")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        k: usize,
    },

    /// L2 normalization is undefined for an all-zero row.
    #[error("row {row} has zero norm and cannot be normalized")]
    ZeroRow { row: usize },

    /// Two objects that must agree on a dimension do not.
    #[error("dimension mismatch ({context}): expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    /// An operation received an empty logit row.
    #[error("empty logit row")]
    EmptyRow,

    /// A scorer or rule needs more classes than the input provides.
    #[error("too few classes: need at least {needed}, found {found}")]
    TooFewClasses { needed: usize, found: usize },

    /// A top-N parameter is outside its valid range.
    #[error("invalid top-N: {detail}")]
    BadN { detail: String },

    /// A configuration scalar is outside its documented domain.
    #[error("invalid parameter {name}: {detail}")]
    InvalidParameter { name: &'static str, detail: String },

    /// Inter-class pair sampling needs at least two distinct labels.
    #[error("dataset contains a single class; inter-class pairing is impossible")]
    SingleClassDataset,

    /// An operation needs more samples than the input provides.
    #[error("too few samples: need at least {needed}, found {found}")]
    TooFewSamples { needed: usize, found: usize },

    /// An input that must be sorted descending is not.
    #[error("input not sorted descending at position {index}")]
    NotSorted { index: usize },

    /// A cohort matrix with zero rows (defensive; constructors forbid it).
    #[error("empty matrix")]
    EmptyMatrix,

    /// A score set required to be nonempty is empty.
    #[error("empty score set: {context}")]
    EmptySet { context: String },

    /// The brute-force pair loop refuses absurdly large inputs.
    #[error("pair count {pairs} exceeds brute-force limit {limit}")]
    TooLarge { pairs: u128, limit: u128 },

    /// A simulation world fails its structural invariants.
    #[error("invalid simulation world: {detail}")]
    BadWorld { detail: String },

    /// The simulated classifier violates the well-trained condition the
    /// logit-ordering check assumes.
    #[error("ill-trained classifier: {detail}")]
    IllTrainedClassifier { detail: String },

    /// The interpolation coefficient makes the outlier mixture collapse onto
    /// one in-distribution class, so the ordering claim is vacuous.
    #[error("degenerate mixture: alpha = {alpha} collapses outliers onto one class")]
    DegenerateMixture { alpha: f64 },

    /// A per-row scoring failure, annotated with the row that caused it.
    #[error("scoring failed at row {row}: {source}")]
    ScoreRow {
        row: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach a path to a raw I/O error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
