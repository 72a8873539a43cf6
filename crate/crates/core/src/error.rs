use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library. Messages are stable; the CLI and the C ABI
/// surface them verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid manifold: {0}")]
    InvalidManifold(String),

    #[error("invalid eigenfunction: {0}")]
    InvalidEigenfunction(String),

    #[error("no modes at target eigenvalue {0}")]
    EmptyEigenspace(f64),

    #[error("point outside manifold")]
    PointOutside,

    #[error("resolution below Nyquist guard (minimum {minimum} cells per axis, got {got})")]
    UnderResolved { minimum: usize, got: usize },

    #[error("field identically zero on grid")]
    ZeroField,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown domain label {0}")]
    UnknownDomain(u32),

    #[error("degenerate domain {0}: zero L2 mass")]
    DegenerateDomain(u32),

    #[error("radius exceeds injectivity guard ({radius} > {guard})")]
    InjectivityGuard { radius: f64, guard: f64 },

    #[error("cube size must align to grid")]
    CubeMisaligned,

    #[error("invalid covering parameter: {0}")]
    CoveringParameter(String),

    #[error("center not on nodal set (|phi| = {value}, tolerance {tolerance})")]
    NotNodal { value: f64, tolerance: f64 },

    #[error("field carries no analytic eigenfunction")]
    NoAnalyticSpec,

    #[error("no good cube with small local Rayleigh quotient meets domain {0}")]
    SpecialCubeMissing(u32),

    #[error("no domain carries a 3:1 good/bad mass split")]
    StarDomainMissing,

    #[error("need ≥ one decade of λ (got span {span:.3} decades over {count} eigenvalues)")]
    InsufficientSpan { span: f64, count: usize },

    #[error("summation exponent undefined for n = 2")]
    SummationDimension,

    #[error("regression needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wrap with the name of the pipeline stage that produced the error.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
