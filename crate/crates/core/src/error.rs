use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: need d >= 2")]
    InvalidDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("invalid simplex coordinates: {0}")]
    InvalidCoordinates(String),
    #[error("{family} takes {expected} parameter(s), got {got}")]
    ParameterCount { family: &'static str, expected: usize, got: usize },
    #[error("phase-space map has det {det} mod {d}; allowed values are 1 and d-1")]
    SymmetryViolation { det: i64, d: usize },
    #[error("generator indices must satisfy m < n < d, got m={m}, n={n}, d={d}")]
    IndexOrder { m: usize, n: usize, d: usize },
    #[error("negative probability {value:e} at slice ({a},{b}) entry ({x},{y})")]
    NegativeProbability { a: usize, b: usize, x: usize, y: usize, value: f64 },
    #[error("optimizer aborted: objective returned {0}")]
    OptimizerAbort(f64),
    #[error("state has no violation direction (max I_d = {0:e})")]
    NoViolationDirection(f64),
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
    #[error("state vector is not normalized (norm {0})")]
    Unnormalized(f64),
    #[error("brute-force enumeration limited to d <= {limit}, got d = {d}")]
    SizeGuard { d: usize, limit: usize },
    #[error("no closed-form {kind} boundary for family {family}")]
    UnknownBoundary { family: &'static str, kind: &'static str },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by bad input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::OptimizerAbort(_)
                | Error::NumericalDegeneracy(_)
                | Error::NegativeProbability { .. }
                | Error::NoViolationDirection(_)
        )
    }
}
