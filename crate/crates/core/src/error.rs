use alloc::string::String;
use alloc::vec::Vec;

/// Errors reported by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A matrix column has no usable pivot: the candidate pivot magnitude is
    /// below `1e-12` times the column norm.
    #[error("matrix is rank deficient: column {column} has no usable pivot")]
    RankDeficient { column: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("arithmetic overflow while computing {0}")]
    Overflow(&'static str),

    /// The objective produced NaN or an infinity.
    #[error("objective returned non-finite value {value} at index {index:?}")]
    NonFiniteObjective { index: Vec<usize>, value: f64 },

    #[error("problem too large for exhaustive search: {size} variables exceeds the limit of {limit}")]
    TooLarge { size: usize, limit: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
