use std::fmt::Write as _;

use skt_core::audit::relative_entropy_series;
use skt_core::solver::{simulate, StrongProxy};
use skt_core::{Error, Field, Trajectory};

use crate::commands::{num, CliError, ExitStatus, Outcome, Output};
use crate::config::RunConfig;

/// Writes `trajectory.csv`, `entropy.csv` and `simulate_summary.txt`. The
/// relative entropies are taken against the constant state carrying the
/// initial masses. A solver failure keeps the accepted steps and exits 3.
pub fn run(cfg: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    let spec = cfg.model_spec()?;
    let grid = cfg.grid()?;
    let cut = cfg.cutoff_spec()?;
    let u0 = cfg.initial_field(&grid)?;
    let (traj, failure) = match simulate(
        &spec,
        &u0,
        0.0,
        cfg.time.horizon,
        cfg.time.dt,
        &cfg.newton(),
        None,
    ) {
        Ok(t) => (t, None),
        Err(Error::Simulation { source, partial }) => (*partial, Some(source.to_string())),
        Err(e) => return Err(e.into()),
    };

    let measure = grid.measure();
    let mean: Vec<f64> = u0.masses().iter().map(|m| m / measure).collect();
    let reference = Field::constant(grid, &mean)?;
    let proxy = StrongProxy::FineGridRun {
        refinement: 1,
        trajectory: Trajectory::new(reference, 0.0),
    };
    let mut report = relative_entropy_series(&spec, &cut, &traj, &proxy)?;
    report
        .notes
        .push(format!("reference: constant state {mean:?}"));

    let mut summary = String::new();
    let _ = writeln!(summary, "accepted steps: {}", traj.len() - 1);
    let _ = writeln!(summary, "final time: {}", num(traj.final_time()));
    if let Some(m) = traj.meta().iter().map(|m| m.halvings).max() {
        let _ = writeln!(summary, "max step halvings: {m}");
    }
    if let Some(f) = &failure {
        let _ = writeln!(summary, "solver failure: {f}");
    }
    summary.push_str(&report.summary());

    let files = vec![
        out.write("trajectory.csv", &traj.to_csv(cfg.output.cadence))?,
        out.write("entropy.csv", &report.to_csv())?,
        out.write("simulate_summary.txt", &summary)?,
    ];
    let status = if failure.is_some() {
        ExitStatus::SolverFailure
    } else {
        ExitStatus::Success
    };
    Ok(Outcome {
        status,
        summary,
        files,
    })
}
