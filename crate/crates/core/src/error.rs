use thiserror::Error;

use crate::jacobi::JacobiTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("alpha mismatch: expected {expected}, found {found}")]
    AlphaMismatch { expected: f64, found: f64 },

    #[error("nonphysical scale at index {index}: gamma^alpha = {value}")]
    NonphysicalScale { index: usize, value: f64 },

    #[error("nonphysical skew at index {index}: beta = {value}")]
    NonphysicalSkew { index: usize, value: f64 },

    #[error("singular matrix: pivot {pivot:e} below threshold {threshold:e}")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("spectral radius estimate did not converge after {iterations} iterations (last estimate {estimate})")]
    SpectralUnconverged { estimate: f64, iterations: usize },

    #[error("cannot normalize to unit diagonal: A[{index}][{index}] = {value}")]
    NormalizationImpossible { index: usize, value: f64 },

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("density inversion produced ringing {value:e} at x = {x}")]
    InversionRinging { x: f64, value: f64 },

    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),

    #[error("Stable-Jacobi did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        trace: Box<JacobiTrace>,
    },

    #[error("Stable-Jacobi diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("not a tree: {0}")]
    NotATree(String),

    #[error("model shape: {0}")]
    ModelShape(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_)
            | Error::AlphaMismatch { .. }
            | Error::NormalizationImpossible { .. }
            | Error::DegenerateDistribution(_)
            | Error::UnsupportedFeature(_)
            | Error::NotATree(_)
            | Error::ModelShape(_)
            | Error::Generation(_)
            | Error::Parse(_)
            | Error::Validation(_) => ErrorKind::Validation,
            Error::NonphysicalScale { .. }
            | Error::NonphysicalSkew { .. }
            | Error::SingularMatrix { .. }
            | Error::SpectralUnconverged { .. }
            | Error::InversionRinging { .. }
            | Error::NotConverged { .. }
            | Error::Divergence { .. } => ErrorKind::Numerical,
            Error::Io(_) => ErrorKind::Io,
        }
    }

    /// Short machine-readable tag.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::AlphaMismatch { .. } => "alpha-mismatch",
            Error::NonphysicalScale { .. } => "nonphysical-scale",
            Error::NonphysicalSkew { .. } => "nonphysical-skew",
            Error::SingularMatrix { .. } => "singular-matrix",
            Error::SpectralUnconverged { .. } => "spectral-estimate-unconverged",
            Error::NormalizationImpossible { .. } => "normalization-impossible",
            Error::DegenerateDistribution(_) => "degenerate-distribution",
            Error::InversionRinging { .. } => "inversion-ringing",
            Error::UnsupportedFeature(_) => "unsupported-feature",
            Error::NotConverged { .. } => "not-converged",
            Error::Divergence { .. } => "divergence",
            Error::NotATree(_) => "not-a-tree",
            Error::ModelShape(_) => "model-shape",
            Error::Generation(_) => "generation",
            Error::Parse(_) => "parse",
            Error::Validation(_) => "validation",
            Error::Io(_) => "io",
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        if err.is_io_error() {
            match err.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                _ => unreachable!(),
            }
        } else {
            Error::Parse(err.to_string())
        }
    }
}
