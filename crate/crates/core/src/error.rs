use thiserror::Error;

pub type Result<T> = std::result::Result<T, SmfError>;

#[derive(Debug, Error)]
pub enum SmfError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("row {index} sums to zero")]
    EmptyRow { index: usize },

    #[error("matrix has rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("factor {factor} has empty support in {side}")]
    DegenerateFactor { factor: usize, side: &'static str },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SmfError {
    /// Shorthand for [`SmfError::InvalidInput`].
    pub fn invalid(msg: impl Into<String>) -> Self {
        SmfError::InvalidInput(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        SmfError::ShapeMismatch(msg.into())
    }

    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, SmfError::RankDeficient { .. } | SmfError::NonFinite { .. })
    }
}
