use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading data or running a grounding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(
        "{path}: {rejected} of {total} lines rejected (more than 10%); first problem: {first}"
    )]
    TooManyRejects {
        path: PathBuf,
        rejected: usize,
        total: usize,
        first: String,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("temporal split needs at least 10 interactions, got {0}")]
    TooFewInteractions(usize),

    #[error("item id {0:?} collides with the reserved padding token")]
    PadCollision(String),

    #[error("catalog is empty")]
    EmptyCatalog,

    #[error("duplicate item id {0:?}")]
    DuplicateItem(String),

    #[error("embedding file is missing {count} catalog items, e.g. {examples:?}")]
    MissingEmbeddings { count: usize, examples: Vec<String> },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimMismatch {
        expected: usize,
        actual: usize,
        context: String,
    },

    #[error("non-finite embedding value for item {0:?}")]
    NonFinite(String),

    #[error("item {0:?} is not in the catalog")]
    UnknownItem(String),

    #[error("injection weight {value} at item {index} is outside [0, 1]")]
    WeightOutOfRange { index: usize, value: f64 },

    #[error("gamma must be finite and non-negative, got {0}")]
    InvalidGamma(f64),

    #[error("every item is excluded; nothing left to rank")]
    AllExcluded,

    #[error("target item {0} was excluded from the ranking")]
    TargetExcluded(usize),

    #[error("n-gram model is empty")]
    EmptyModel,

    #[error("validation set is empty")]
    EmptyValidation,

    #[error("report mismatch: {0}")]
    ReportMismatch(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
