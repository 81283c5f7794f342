use thiserror::Error;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("parameter {value} outside [{lower}, {upper}]")]
    OutOfDomain { value: f64, lower: f64, upper: f64 },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unsupported spline degree {0} (only quadratic spaces are supported)")]
    UnsupportedDegree(usize),

    #[error("geometry evaluation failed at ({s}, {t}): {reason}")]
    Geometry { s: f64, t: f64, reason: String },

    #[error("non-finite sample f({s}, {t}) = {value}")]
    NonFiniteSample { s: f64, t: f64, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("closest-point projection did not converge at ({x}, {y}) after {iterations} iterations (|phi| = {residual:e})")]
    ProjectionFailed {
        x: f64,
        y: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("element {element} is not cut by the interface")]
    NotCut { element: usize },

    #[error("interface crosses edge {edge} of element {element} {roots} times; refine the mesh")]
    UnresolvedInterface {
        element: usize,
        edge: usize,
        roots: usize,
    },

    #[error("non-positive pivot {value:e} at index {index}")]
    NonPositivePivot { index: usize, value: f64 },

    #[error("non-positive diagonal {value:e} at dof {dof}")]
    NonPositiveDiagonal { dof: usize, value: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("eigenvalue iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing exact solution")]
    MissingExactSolution,

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
