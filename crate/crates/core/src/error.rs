use thiserror::Error;

/// Errors raised by the growth-mechanics kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrowthError {
    #[error("point outside domain: {0}")]
    Domain(String),

    #[error("metric not positive-definite: {0}")]
    Definiteness(String),

    #[error("orientation lost: dr/dR = {stretch} at R = {radius}")]
    Orientation { radius: f64, stretch: f64 },

    #[error("degenerate growth geometry: {0}")]
    Geometry(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("root bracket not found: {0}")]
    Bracket(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("invalid configuration: {0}")]
    Configuration(String),

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("constitutive law inconsistent: {0}")]
    Constitutive(String),

    #[error("metric is not embeddable as a surface of revolution on [{start}, {end}]")]
    NonEmbeddable { start: f64, end: f64 },

    #[error("mesh construction failed: {0}")]
    Mesh(String),

    #[error("degenerate cone: eta = -1 gives an unbounded cone parameter")]
    DegenerateCone,

    #[error("singular point: {0}")]
    SingularPoint(String),

    #[error("step size too large at t = {t}: {reason}")]
    StepSize { t: f64, reason: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
}

pub type Result<T> = std::result::Result<T, GrowthError>;
