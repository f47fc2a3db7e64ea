use std::path::PathBuf;

use crate::solver::SolveResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("network is disconnected: bus {0} is unreachable from the slack bus")]
    Disconnected(usize),

    #[error("reduced susceptance matrix is singular")]
    SingularSusceptance,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("problem is infeasible: {}", .0.diagnostic())]
    Infeasible(Box<SolveResult>),

    #[error("solver hit the iteration limit ({} iterations, primal {:.3e}, dual {:.3e}, gap {:.3e})",
        .0.iterations, .0.residuals.primal, .0.residuals.dual, .0.residuals.gap)]
    MaxIterations(Box<SolveResult>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate active set: reduced sensitivity system is singular ({0})")]
    DegenerateActiveSet(String),

    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing labels: {0}")]
    MissingLabels(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("output error: {0}")]
    Output(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than a numerical or runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::Validation(_)
                | Error::Dimension(_)
                | Error::Config(_)
                | Error::MissingLabels(_)
        )
    }
}
