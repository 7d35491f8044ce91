use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate element {triangle}: signed area {area:e}")]
    DegenerateElement { triangle: usize, area: f64 },

    #[error("nonpositive coefficient {value:e} on element {triangle}")]
    NonpositiveCoefficient { triangle: usize, value: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("inner solver breakdown in block {block}: {reason}")]
    InnerSolver { block: &'static str, reason: String },

    #[error("Krylov solver did not converge after {iterations} iterations (residual {residual:e})")]
    KrylovNonConvergence { iterations: usize, residual: f64 },

    #[error("quasi-Newton iteration did not converge after {iterations} iterations (last update {update:e})")]
    NewtonNonConvergence { iterations: usize, update: f64 },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("traveling-wave solver did not converge ({0}); try a wider interval or a finer grid")]
    ProfileNonConvergence(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the failure comes from an iterative solve that did not converge.
    pub fn is_nonconvergence(&self) -> bool {
        matches!(
            self,
            Error::KrylovNonConvergence { .. }
                | Error::NewtonNonConvergence { .. }
                | Error::ProfileNonConvergence(_)
                | Error::InnerSolver { .. }
                | Error::NumericalBreakdown(_)
                | Error::NotPositiveDefinite { .. }
                | Error::NonpositiveCoefficient { .. }
                | Error::DegenerateElement { .. }
        )
    }

    /// Process exit status for the command-line tool: 2 for bad input, 3 for
    /// solver failure, 4 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Io { .. } => 4,
            e if e.is_nonconvergence() => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
