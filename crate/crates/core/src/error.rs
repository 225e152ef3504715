use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (last jitter tried: {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("hyperparameter fit failed: {0}")]
    FitFailed(String),
    #[error("output variance {0:e} is too small for sensitivity indices")]
    DegenerateVariance(f64),
    #[error("invalid input distribution: {0}")]
    InvalidDistribution(String),
    #[error("no feasible point inside the bounds")]
    NoFeasiblePoint,
    #[error("optimization iteration {iteration} failed: {reason}")]
    IterationFailed { iteration: usize, reason: String },
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("no observations available")]
    EmptyData,
    #[error("truss stiffness matrix is singular")]
    SingularStiffness,
    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
