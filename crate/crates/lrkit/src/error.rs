use thiserror::Error;

/// Errors raised by spline construction, refinement and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("value {0} is not a knot of the knot vector")]
    NotAKnot(f64),

    #[error("knot vectors are not nested: {0}")]
    NotNested(String),

    #[error("meshrectangle does not split the support of any B-spline")]
    NoSplit,

    #[error("parameter {0:?} is outside the domain")]
    OutOfDomain(Vec<f64>),

    #[error("malformed mesh: {0}")]
    MalformedMesh(String),

    #[error("refinement did not reach a consistent state after {iterations} iterations")]
    FixpointFailure { iterations: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error in record {record}: {msg}")]
    Validation { record: usize, msg: String },

    #[error("inconsistent collection: {0}")]
    Inconsistency(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
