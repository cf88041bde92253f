use thiserror::Error;

/// Errors raised by the regularization toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("power iteration did not settle after {iterations} iterations")]
    PowerIterationStalled { iterations: usize },

    #[error("solver did not converge at alpha = {alpha:e}: residual {residual:e} after {iterations} iterations")]
    NotConverged {
        alpha: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("discrepancy unreachable: no alpha_j with j <= {j_max} reaches tau*delta = {target:e} (last discrepancy {last:e})")]
    DiscrepancyUnreachable {
        j_max: usize,
        target: f64,
        last: f64,
    },

    #[error("need at least {needed} valid points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("truncation too coarse: tail sum {tail:e} exceeds {limit:e}")]
    TruncationTooCoarse { tail: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
