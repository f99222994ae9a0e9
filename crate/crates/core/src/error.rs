use thiserror::Error;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EsfemError {
    #[error("point {point:?} is not on the reference surface (level set = {value:e})")]
    NotOnSurface { point: [f64; 3], value: f64 },

    #[error("level-set gradient vanishes at {point:?} (|grad| = {norm:e})")]
    Singular { point: [f64; 3], norm: f64 },

    #[error("closest-point projection did not converge after {iterations} iterations (residual {residual:e})")]
    ProjectionFailed { iterations: usize, residual: f64 },

    #[error("degenerate triangle {index} (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero diagonal entry in row {row}")]
    ZeroDiagonal { row: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("{solver} did not converge in {iterations} iterations (relative residual {residual:e})")]
    LinearSolveFailed {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("singular matrix encountered at pivot {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("negative quadratic form {value:e}")]
    NegativeQuadraticForm { value: f64 },

    #[error("nonlinear solver did not converge in {iterations} iterations; residual trace {trace:?}")]
    NonlinearSolveFailed { iterations: usize, trace: Vec<f64> },

    #[error("step {step} (t = {time}) failed: {source}")]
    StepFailed {
        step: usize,
        time: f64,
        #[source]
        source: Box<EsfemError>,
    },

    #[error("non-positive error value {value:e} at index {index}")]
    NonPositiveError { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl EsfemError {
    /// True for failures of a numerical method (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            EsfemError::ProjectionFailed { .. }
                | EsfemError::LinearSolveFailed { .. }
                | EsfemError::SingularMatrix { .. }
                | EsfemError::NonlinearSolveFailed { .. }
                | EsfemError::StepFailed { .. }
                | EsfemError::Singular { .. }
                | EsfemError::NegativeQuadraticForm { .. }
        )
    }
}

impl From<std::io::Error> for EsfemError {
    fn from(e: std::io::Error) -> Self {
        EsfemError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, EsfemError>;
