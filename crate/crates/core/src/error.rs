use thiserror::Error;

/// Errors raised by the estimation-limit routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian: |A - A^H| = {deviation:e} at ({row}, {col}) exceeds tolerance {tolerance:e}")]
    NotHermitian {
        deviation: f64,
        tolerance: f64,
        row: usize,
        col: usize,
    },

    #[error(
        "matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:e} below {floor:e}"
    )]
    NotPsd { min_eigenvalue: f64, floor: f64 },

    #[error("density matrix trace is {trace} (tolerance {tolerance:e})")]
    BadTrace { trace: f64, tolerance: f64 },

    #[error("derivative {index} has trace {trace:e}, expected 0 within {tolerance:e}")]
    DerivativeNotTraceless {
        index: usize,
        trace: f64,
        tolerance: f64,
    },

    #[error("derivative {index} has weight {weight:e} on the kernel of rho; SLD undefined")]
    UnsupportedDerivative { index: usize, weight: f64 },

    #[error("RLD undefined: rho is rank deficient (min eigenvalue {min_eigenvalue:e})")]
    RldUndefined { min_eigenvalue: f64 },

    #[error("incompatibility coefficient undefined: QFI diagonal entries ({f11:e}, {f22:e})")]
    UndefinedCoefficient { f11: f64, f22: f64 },

    #[error("incompatibility coefficient {value} outside [0, 1]")]
    CoefficientOutOfRange { value: f64 },

    #[error("weight matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    WeightNotPositiveDefinite { min_eigenvalue: f64 },

    #[error("locally unbiased constraints are infeasible: derivatives are linearly dependent")]
    Infeasible,

    #[error("solver did not converge after {iterations} iterations (gradient norm {gradient_norm:e}, constraint residual {constraint_residual:e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        constraint_residual: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("outcome {outcome} has probability {probability:e} but derivative {derivative:e}; Fisher information unbounded")]
    SingularOutcome {
        outcome: usize,
        probability: f64,
        derivative: f64,
    },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("invalid input: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
