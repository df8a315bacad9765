use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Expression syntax error; `offset` is a byte offset into the source text.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("Newton iteration failed to converge at t = {t}; residual history {history:?}")]
    NewtonDiverged { t: f64, history: Vec<f64> },

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error("coupling sweeps failed to converge at t = {t}; change history {history:?}")]
    SweepDiverged { t: f64, history: Vec<f64> },

    #[error("series overflowed after {terms} terms (last partial sum {partial_sum})")]
    SeriesOverflow { terms: usize, partial_sum: f64 },

    #[error("small-gain condition violated: {0}")]
    SmallGain(String),
}

impl Error {
    /// True for failures of the numerical machinery itself, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::NewtonDiverged { .. }
                | Error::LinearSolver(_)
                | Error::SweepDiverged { .. }
                | Error::SeriesOverflow { .. }
        )
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
