use std::path::PathBuf;

/// Errors produced by the library and surfaced by the CLI.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("need at least {needed} samples, trace has {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("projection center coincides with a trajectory point (distance {distance:e})")]
    DegenerateProjection { distance: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{}:{line}: {reason}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Process exit status classes used by the command-line tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Usage = 2,
    InputData = 3,
    Numerical = 4,
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn exit_class(&self) -> ExitClass {
        match self {
            Error::InvalidParameter { .. } => ExitClass::Usage,
            Error::NoConvergence { .. } => ExitClass::Numerical,
            Error::InsufficientData { .. }
            | Error::DimensionMismatch { .. }
            | Error::NonFinite { .. }
            | Error::DegenerateProjection { .. }
            | Error::Parse { .. }
            | Error::Io { .. } => ExitClass::InputData,
        }
    }

    /// Short machine-readable tag for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::DegenerateProjection { .. } => "degenerate_projection",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
