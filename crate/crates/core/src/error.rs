use thiserror::Error;

use crate::conic::SolveStatus;

/// Errors raised by operator, channel, solver and chain computations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("operator basis is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("Kraus operators are not trace preserving (residual {0:.3e})")]
    NotTracePreserving(f64),

    #[error("channel output trace deviates from 1 by {0:.3e}")]
    NumericalTp(f64),

    #[error(
        "map is not CPTP (min eigenvalue {min_eigenvalue:.3e}, TP residual {tp_residual:.3e})"
    )]
    NotCptp {
        min_eigenvalue: f64,
        tp_residual: f64,
    },

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("negative weight {0} in weighted divergence")]
    NegativeWeight(f64),

    #[error("label sets of the two families differ")]
    LabelMismatch,

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),

    #[error("a family needs at least one member")]
    EmptyFamily,

    #[error("unsupported divergence specification: {0}")]
    UnsupportedSpec(String),

    #[error("malformed conic problem: {0}")]
    InvalidProblem(String),

    #[error("no strictly feasible starting point: {0}")]
    NoInteriorPoint(String),

    #[error("conic solver finished with status {status:?} (gap {gap:.3e}, pinf {pinf:.3e}, dinf {dinf:.3e})")]
    Solver {
        status: SolveStatus,
        gap: f64,
        pinf: f64,
        dinf: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that come from a failed or stalled optimization.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::Solver { .. })
    }
}
