use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate jacobian: smallest Cholesky pivot {pivot:e}")]
    DegenerateJacobian { pivot: f64 },
    #[error("point outside the support box")]
    OutOfSupport,
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("initial point has non-finite density")]
    InvalidStart,
    #[error("adaptation failure: warmup acceptance {0:.4}")]
    AdaptationFailure(f64),
    #[error("unsupported oracle: {0}")]
    UnsupportedOracle(String),
    #[error("insufficient data: {0} usable pairs, need 3")]
    InsufficientData(usize),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: &str) -> Error {
    Error::InvalidArgument(String::from(msg))
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
