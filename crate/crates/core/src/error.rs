use thiserror::Error;

use crate::solver::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("solver failure at t = {t}: {reason}")]
    Solver {
        t: f64,
        reason: String,
        /// Last scaled residual norm seen before giving up.
        residual: f64,
        /// Smallest step size tried.
        dt_min: f64,
    },

    /// A simulation stopped early; the accepted part of the run is kept.
    #[error("simulation stopped: {source}")]
    Simulation {
        #[source]
        source: Box<Error>,
        partial: Box<Trajectory>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
