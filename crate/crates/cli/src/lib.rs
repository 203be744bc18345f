//! Configuration-driven front end for `skt-core`: hypothesis checks,
//! simulations, weak-strong probes, entropy-balance audits and sweeps.

use std::path::Path;

pub mod commands;
pub mod config;

pub use commands::{CliError, ExitStatus, Outcome, Output};
pub use config::{ConfigError, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Check,
    Simulate,
    Probe,
    Audit,
    Sweep,
}

/// Loads the config, applies the overrides and runs `command`. The output
/// directory is `out_dir`, else `output.dir`, else the working directory.
pub fn run(
    command: Command,
    config: &Path,
    out_dir: Option<&Path>,
    seed: Option<u64>,
) -> Result<Outcome, CliError> {
    let src = std::fs::read_to_string(config).map_err(|e| ConfigError {
        key: None,
        line: None,
        message: format!("cannot read {}: {e}", config.display()),
    })?;
    let mut cfg = RunConfig::parse(&src)?;
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.validate()?;
    }
    let dir = match (out_dir, &cfg.output.dir) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => d.into(),
        (None, None) => ".".into(),
    };
    let out = Output::new(dir)?;
    match command {
        Command::Check => commands::check::run(&cfg, &out),
        Command::Simulate => commands::simulate::run(&cfg, &out),
        Command::Probe => commands::probe::run(&cfg, &out),
        Command::Audit => commands::audit::run(&cfg, &out),
        Command::Sweep => commands::sweep::run(&cfg, &out),
    }
}
