//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or argument violates its domain (negative rate, bad
    /// probability, non-positive step, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A requested output time does not land on the solver step grid.
    #[error("grid alignment: {0}")]
    GridAlignment(String),

    /// A state vector is not on the probability simplex.
    #[error("not on the simplex: {0}")]
    NonSimplex(String),

    /// Two collections that must correspond have different lengths.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// A cross-section with zero participants cannot yield fractions.
    #[error("zero participants at visit index {visit_index} (t = {time})")]
    ZeroTotalVisit { visit_index: usize, time: f64 },

    /// Event-time inversion failed to bracket a root. Indicates an internal
    /// defect, never expected for valid inputs.
    #[error("root solve failed: {0}")]
    RootSolve(String),

    /// The objective is not finite where it must be (e.g. at the initial
    /// point of a fit).
    #[error("non-finite objective: {0}")]
    NonFiniteObjective(String),

    /// A quantile summary was requested over zero converged runs.
    #[error("no converged bootstrap runs of the requested kind")]
    NoConvergedRuns,

    /// Malformed CSV input, with the offending 1-based line number.
    #[error("csv line {line}: {message}")]
    CsvFormat { line: usize, message: String },

    /// Invalid run configuration (file or flags).
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for this error class: 2 config/usage, 3 data
    /// validation, 4 I/O, 1 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::InvalidParameter(_)
            | Error::GridAlignment(_)
            | Error::NonSimplex(_)
            | Error::LengthMismatch(_)
            | Error::ZeroTotalVisit { .. }
            | Error::NonFiniteObjective(_)
            | Error::NoConvergedRuns
            | Error::CsvFormat { .. } => 3,
            Error::Io(_) => 4,
            Error::RootSolve(_) => 1,
        }
    }
}
