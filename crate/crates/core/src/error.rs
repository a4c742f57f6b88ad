use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("imaginary part of z must be positive, got {0}")]
    NonPositiveImaginary(f64),

    #[error("aspect ratio y must lie in (0, 1], got {0}")]
    InvalidAspectRatio(f64),

    #[error("degenerate denominator |z + f| = {0:e}")]
    DegenerateDenominator(f64),

    #[error("z is too close to the spectral edge: |1 - f(z)^2| = {0:e}")]
    NearSpectralEdge(f64),

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("truncation exponent t must lie in (0, 1/4), got {0}")]
    InvalidTruncationExponent(f64),

    #[error("unsupported expansion order p = {0} (expected 1, 2 or 3)")]
    UnsupportedOrder(usize),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("input is empty")]
    EmptyInput,

    #[error(
        "ensemble needs {required} bytes of spectra but the budget is {budget}; use streaming mode"
    )]
    MemoryBudget { required: usize, budget: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
