use thiserror::Error;

/// Errors raised anywhere in the mesh → assembly → solve → postprocess pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("distortion rejected at vertex {vertex}: no valid position after {retries} retries")]
    DistortionRejected { vertex: usize, retries: usize },

    #[error("side ({0}, {1}) is shared by more than two cells")]
    NonManifold(usize, usize),

    #[error("no boundary edge is marked Dirichlet")]
    EmptyDirichletSet,

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("mesh invariant violated: {0}")]
    InvariantViolation(String),

    #[error("singular or inverted Jacobian (det = {det:e})")]
    SingularJacobian { det: f64 },

    #[error("unsupported quadrature order {0}")]
    UnsupportedOrder(usize),

    #[error("Poisson ratio {0} is at or beyond the incompressible limit 0.5")]
    IncompressibleLimit(f64),

    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("mesh boundary edges have not been classified")]
    MeshNotClassified,

    #[error("matrix is singular to working precision")]
    SingularMatrix,

    #[error("relative residual {residual:e} exceeds tolerance {tolerance:e}")]
    ToleranceNotReached { residual: f64, tolerance: f64 },

    #[error("stress projection mass matrix is singular")]
    SingularMass,

    #[error("no exact or reference solution available")]
    MissingExact,

    #[error("error value at index {0} is zero or not finite; rate undefined")]
    ZeroError(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("invalid experiment file: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
