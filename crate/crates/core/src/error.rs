use thiserror::Error;

/// Errors raised by the spaces, sets, maps and solvers of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("gram matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("gram matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("gram matrix is ill-conditioned (condition estimate {estimate:e})")]
    IllConditioned { estimate: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("ball metric differs from the query space")]
    MetricMismatch,

    #[error("{context} did not converge after {iterations} iterations (last change {last_change:e})")]
    NonConvergence {
        context: &'static str,
        iterations: usize,
        last_change: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("constraint l_H < -l_V/c_VH^2 violated: l_V={l_v}, l_H={l_h}, c_VH={c_vh}")]
    GelfandConstraint { l_v: f64, l_h: f64, c_vh: f64 },

    #[error("residual increased for {consecutive} consecutive steps (step {step}, residual {residual:e})")]
    Divergence {
        step: usize,
        consecutive: usize,
        residual: f64,
        residuals: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
