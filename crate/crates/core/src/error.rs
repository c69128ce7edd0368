use thiserror::Error;

/// Errors raised by geometry, map and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("parameter `{name}` out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("point {point:?} is outside the domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("chain point h_{index} is outside the map domain")]
    ChainPointOutside { index: usize },

    #[error("segment leaves the domain at r = {r}")]
    SegmentEscapes { r: f64, point: Vec<f64> },

    #[error("precondition failed: {reason}")]
    Precondition {
        reason: String,
        witness: Option<Vec<f64>>,
    },

    #[error("refused: {reason}")]
    Refused { reason: String },

    #[error("sampling failed after {attempts} attempts: {reason}")]
    Sampling { attempts: usize, reason: String },

    #[error("rank-deficient sample set; deficient directions: {directions:?}")]
    RankDeficient { directions: Vec<Vec<f64>> },

    #[error("matrix is singular")]
    Singular,

    #[error("invalid definition: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;

impl GeomError {
    pub(crate) fn precondition(reason: impl Into<String>) -> Self {
        GeomError::Precondition {
            reason: reason.into(),
            witness: None,
        }
    }

    pub(crate) fn precondition_at(reason: impl Into<String>, witness: &[f64]) -> Self {
        GeomError::Precondition {
            reason: reason.into(),
            witness: Some(witness.to_vec()),
        }
    }
}
