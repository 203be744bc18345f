use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use skt_cli::Command;

/// Entropy experiments for SKT cross-diffusion systems.
///
/// Exit codes: 0 success, 1 config error, 2 hypothesis failure, 3 solver
/// failure, 4 probe criterion unmet.
#[derive(Parser)]
#[command(name = "skt", version)]
struct Args {
    command: Command,
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the top-level `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match skt_cli::run(
        args.command,
        &args.config,
        args.out_dir.as_deref(),
        args.seed,
    ) {
        Ok(o) => {
            print!("{}", o.summary);
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(o.status.code())
        }
        Err(e) => {
            eprintln!("skt: {e}");
            ExitCode::from(e.status().code())
        }
    }
}
