//! Subcommands. Each returns an [`Outcome`] whose exit code follows the
//! contract 0 success, 1 config error, 2 hypothesis failure, 3 solver
//! failure, 4 probe criterion unmet.

use std::fs;
use std::path::{Path, PathBuf};

use skt_core::model::validate_hypotheses;
use skt_core::model::HypothesisReport;
use skt_core::ModelSpec;

use crate::config::{ConfigError, RunConfig};

pub mod audit;
pub mod check;
pub mod probe;
pub mod simulate;
pub mod sweep;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    ConfigError = 1,
    HypothesisFailure = 2,
    SolverFailure = 3,
    CriterionUnmet = 4,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("hypothesis failure: {0}")]
    Hypothesis(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Config(_) | CliError::Io { .. } => ExitStatus::ConfigError,
            CliError::Hypothesis(_) => ExitStatus::HypothesisFailure,
            CliError::Solver(_) => ExitStatus::SolverFailure,
        }
    }
}

impl From<skt_core::Error> for CliError {
    fn from(e: skt_core::Error) -> Self {
        use skt_core::Error as E;
        match e {
            E::Solver { .. } | E::Simulation { .. } => CliError::Solver(e.to_string()),
            E::Hypothesis(m) => CliError::Hypothesis(m),
            E::InvalidInput(_) | E::GridMismatch(_) => CliError::Config(ConfigError {
                key: None,
                line: None,
                message: e.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: ExitStatus,
    /// Human-readable summary printed on stdout.
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Output directory; created on first use.
#[derive(Clone, Debug)]
pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Output, CliError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(Output { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

/// Hypothesis report with (H3) filled in from the configured initial data.
pub(crate) fn hypothesis_report(
    cfg: &RunConfig,
    spec: &ModelSpec,
) -> Result<HypothesisReport, CliError> {
    let mut rep = validate_hypotheses(spec, &cfg.sampling()?)?;
    rep.record_initial_data(cfg.initial_field(&cfg.grid()?)?.min());
    Ok(rep)
}

/// 17 significant digits.
pub(crate) fn num(x: f64) -> String {
    format!("{x:.16e}")
}
