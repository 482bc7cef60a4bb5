use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("degree overflow: bidegree ({p},{q}) exceeds complex dimension {n}")]
    DegreeOverflow { p: usize, q: usize, n: usize },
    #[error("direction index {index} out of range for complex dimension {n}")]
    Direction { index: usize, n: usize },
    #[error("wrong bidegree: expected {expected}, found ({p},{q})")]
    Bidegree { expected: String, p: usize, q: usize },
    #[error("unsupported complex degree {0}")]
    UnsupportedDegree(usize),
    #[error("configuration violates {what}: residual {residual:e} > tolerance {tol:e}")]
    Precondition { what: String, residual: f64, tol: f64 },
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("hermitian metric is not positive definite at grid point {0}")]
    NotPositive(usize),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("direction {0} of the family is ineffective (G(v,v) below threshold)")]
    Ineffective(usize),
    #[error("cannot write output: {0}")]
    Output(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
