//! Crate-wide error type.

use thiserror::Error;

use crate::conic::SolveStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("variable space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("unknown variable block `{0}`")]
    UnknownBlock(String),

    #[error("duplicate variable block `{0}`")]
    DuplicateBlock(String),

    #[error("insufficient moment data: degree {required} required, only {available} available")]
    InsufficientMoments { required: u32, available: u32 },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("mixture weight {0} must lie strictly inside (0, 1)")]
    InvalidMixtureWeight(f64),

    #[error("empty support sample: no accepted point after {attempts} attempts")]
    EmptySupportSample { attempts: usize },

    #[error("degree overflow: monomial {monomial} has degree {degree} > 2k = {max}")]
    DegreeOverflow {
        monomial: String,
        degree: u32,
        max: u32,
    },

    #[error("relaxation order too small: {0}")]
    OrderTooSmall(String),

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("not a recourse certificate: {0}")]
    NotRecourseCertificate(String),

    #[error("conic solve ended with status {status:?}: {detail}")]
    Solver { status: SolveStatus, detail: String },

    #[error("second-stage feasible set is empty at (x, xi) = {point:?}")]
    EmptyRecourse { point: Vec<f64> },

    #[error("scenario {index}: {source}")]
    Scenario {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("infeasible input point: violated constraints {violated:?} of {set}")]
    InfeasiblePoint { set: String, violated: Vec<usize> },

    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}
