//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Image or mesh shape violates an invariant (minimum size, finiteness).
    #[error("invalid image: {0}")]
    InvalidImage(String),

    /// A configuration value violates its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Coefficient field contains a nonpositive entry; the assembled system
    /// would lose its positive-definiteness guarantee.
    #[error("nonpositive diffusion coefficient {value} at cell ({row}, {col})")]
    NonPositiveCoefficient { row: usize, col: usize, value: f64 },

    /// Iterative solver hit its iteration cap before reaching the requested
    /// residual reduction.
    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDidNotConverge { iterations: usize, residual: f64 },

    /// Interpolation coordinates fall outside the image.
    #[error("sample coordinates ({x}, {y}) outside the valid interpolation region")]
    OutOfBounds { x: f64, y: f64 },

    /// No pixel has a full in-image neighborhood for the requested radius.
    #[error("empty encoding region: {rows}x{cols} image with radius {radius}")]
    EmptyRegion { rows: usize, cols: usize, radius: f64 },

    /// Vector length does not match what the model or system expects.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Not enough samples or classes to fit a model.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Regularized covariance still failed the positive-definiteness check.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// Dataset directory layout problems (empty class, missing groups, ...).
    #[error("dataset error: {0}")]
    Dataset(String),

    /// Failure inside an experiment run, naming the image or split at fault.
    #[error("experiment failed at {context}: {message}")]
    Experiment { context: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Unparseable or unsupported image file.
    #[error("{path}: {message}")]
    ImageFormat { path: PathBuf, message: String },

    /// Malformed CSV or model file.
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image_format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::ImageFormat {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
