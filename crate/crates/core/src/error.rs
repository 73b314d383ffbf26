use thiserror::Error;

/// Errors raised by the discrimination toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: relative defect {defect:e}")]
    NotHermitian { defect: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid space shape: {0}")]
    InvalidShape(String),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("vector is not unit norm (norm {norm})")]
    NotUnitNorm { norm: f64 },
    #[error("operator is not positive semidefinite: minimum eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("input vectors are linearly dependent")]
    LinearlyDependent,
    #[error("empty input")]
    EmptyInput,
    #[error("S̃_μ is not a subspace here: the ensemble does not have full support")]
    NotFullSupport,
    #[error("zero-dimensional subspace")]
    ZeroDimensional,
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("state index {index} out of range 1..={count}")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("witness validation failed: {0}")]
    WitnessRejected(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
