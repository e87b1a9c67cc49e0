use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("information matrix is rank deficient for design `{design}` (condition number {condition:.3e})")]
    RankDeficient { design: String, condition: f64 },

    #[error("inner fit failed at cubature point {index}: {reason}")]
    CubaturePointFailed { index: usize, reason: String },

    #[error("{excluded} of {total} Monte Carlo fits failed, above the 0.1% budget")]
    ExclusionBudgetExceeded { excluded: usize, total: usize },

    #[error("least-squares fit failed: {0}")]
    FitFailed(String),

    #[error("design is not orthogonal: {0}")]
    NotOrthogonal(String),

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("missing {0}")]
    Missing(&'static str),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
