use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is singular (pivot {pivot:.3e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("line set is not a spanning tree rooted at bus 0: {0}")]
    NotATree(String),

    #[error("line {from}-{to} has non-positive impedance (r={r}, x={x})")]
    NonPositiveImpedance { from: usize, to: usize, r: f64, x: f64 },

    #[error("controller not activated: max voltage margin {margin:.6e} is below the limit")]
    NotActivated { margin: f64 },

    #[error("KKT system is singular (active rows are linearly dependent)")]
    SingularKKT,

    #[error("degenerate voltage constraint: b^T Q^-1 b is zero")]
    DegenerateConstraint,

    #[error("no unsaturated actions are left to move")]
    EmptyActiveSet,

    #[error("voltage constraints are infeasible inside the inverter box")]
    Infeasible,

    #[error("QP solver exceeded {0} pivots")]
    MaxPivots(usize),

    #[error("{path}:{line}: parse error: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{path}:{line}: invalid value: {message}")]
    Validation { path: PathBuf, line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Errors caused by bad user input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation { .. }
                | Error::NotATree(_)
                | Error::NonPositiveImpedance { .. }
        ) || matches!(self, Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
