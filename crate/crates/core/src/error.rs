use thiserror::Error;

/// Failures surfaced by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("adaptive quadrature did not converge after {intervals} subintervals (last two estimates {previous:e}, {last:e})")]
    QuadratureFailed {
        intervals: usize,
        previous: f64,
        last: f64,
    },
    #[error("kernel derivative has imaginary residual {residual:e} above threshold {threshold:e}")]
    ImaginaryResidual { residual: f64, threshold: f64 },
    #[error("degenerate covariance: minimum eigenvalue {min_eigenvalue:e} below threshold {threshold:e}")]
    Degenerate { min_eigenvalue: f64, threshold: f64 },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("test function support is not covered by the census box")]
    SupportNotCovered,
    #[error("degenerate critical point: Hessian eigenvalue {eigenvalue:e} within tolerance {tolerance:e}")]
    DegenerateCriticalPoint { eigenvalue: f64, tolerance: f64 },
    #[error("precision target missed: {what} = {value:e} exceeds tolerance {tolerance:e}")]
    Precision {
        what: &'static str,
        value: f64,
        tolerance: f64,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
