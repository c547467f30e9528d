use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AlbError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AlbError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("matrix is not positive definite (pivot {pivot} is not positive)")]
    NotPositiveDefinite { pivot: usize },

    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("candidate set is empty")]
    EmptyCandidateSet,

    #[error("candidate item {item} out of range for {items} items")]
    ItemOutOfRange { item: usize, items: usize },

    #[error("ratings table is empty")]
    EmptyTable,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("cannot read dataset {path}: {source}")]
    DatasetIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("budget exceeded: experiment needs {required} steps, cap is {cap}")]
    BudgetExceeded { required: u128, cap: u128 },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl AlbError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            AlbError::Config(_) => 2,
            AlbError::Parse { .. } | AlbError::EmptyTable | AlbError::DatasetIo { .. } => 3,
            AlbError::BudgetExceeded { .. } => 4,
            _ => 1,
        }
    }
}
