//! Error type shared by all modules.

use std::fmt;

/// Errors produced by operator construction, state manipulation and I/O.
#[derive(Debug)]
pub enum Error {
    /// A Hilbert-space or grid dimension is zero, not divisible as required, etc.
    InvalidDimension(String),
    /// gcd(A, N) != 1, so the modular multiplication map is not a permutation.
    NonCoprime { a: u64, n: u64 },
    /// A spec is internally inconsistent (e.g. N != Aq +/- 1 for the stated sign).
    SpecMismatch(String),
    /// A scalar parameter is out of its admissible range.
    InvalidParameter(String),
    /// Two objects that must share a dimension do not.
    DimensionMismatch { left: usize, right: usize },
    /// A matrix expected to be unitary fails the residual check.
    NonUnitary { residual: f64, tol: f64 },
    /// A file did not conform to the expected format.
    Parse(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDimension(msg) => write!(f, "invalid dimension: {msg}"),
            Error::NonCoprime { a, n } => {
                write!(f, "A = {a} and N = {n} are not coprime; the operator is not a permutation")
            }
            Error::SpecMismatch(msg) => write!(f, "inconsistent spec: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::DimensionMismatch { left, right } => {
                write!(f, "dimension mismatch: {left} vs {right}")
            }
            Error::NonUnitary { residual, tol } => {
                write!(f, "matrix is not unitary: residual {residual:.3e} exceeds {tol:.3e}")
            }
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
