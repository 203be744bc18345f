use rayon::prelude::*;

use crate::commands::probe::{scalars, ProbeScalars};
use crate::commands::{CliError, ExitStatus, Outcome, Output};
use crate::config::{ConfigError, RunConfig, SweepValue};

type Point = Vec<(String, SweepValue)>;

fn grid_points(cfg: &RunConfig) -> Vec<Point> {
    let mut points: Vec<Point> = vec![Vec::new()];
    for (key, values) in &cfg.sweep {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

fn run_point(cfg: &RunConfig, point: &Point) -> Result<ProbeScalars, CliError> {
    let mut c = cfg.clone();
    for (k, v) in point {
        c = c.with_override(k, v)?;
    }
    scalars(&c)
}

fn csv_escape(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "'").replace('\n', " "))
}

/// Runs one probe per point of the Cartesian product of `[sweep]`, in
/// parallel, and writes `sweep.csv` with rows in lexicographic parameter
/// order. Exit 0 if any row ran, 3 if all failed.
pub fn run(cfg: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    if cfg.sweep.is_empty() {
        return Err(ConfigError::at("sweep", "no sweep parameters configured").into());
    }
    let mut points = grid_points(cfg);
    points.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|((_, x), (_, y))| x.cmp_lex(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let results: Vec<Result<ProbeScalars, CliError>> =
        points.par_iter().map(|p| run_point(cfg, p)).collect();

    let keys: Vec<&str> = cfg.sweep.keys().map(String::as_str).collect();
    let mut csv = format!(
        "{},status,{},message\n",
        keys.join(","),
        ProbeScalars::HEADER
    );
    let mut ok = 0;
    for (p, r) in points.iter().zip(&results) {
        let params: Vec<String> = p.iter().map(|(_, v)| v.to_string()).collect();
        let line = match r {
            Ok(s) => {
                ok += 1;
                let status = if s.criterion_met {
                    "ok"
                } else {
                    "criterion_unmet"
                };
                format!("{},{status},{},", params.join(","), s.csv_fields())
            }
            Err(e) => {
                let status = match e.status() {
                    ExitStatus::HypothesisFailure => "hypothesis_failure",
                    ExitStatus::SolverFailure => "solver_failure",
                    _ => "config_error",
                };
                format!(
                    "{},{status},,,,,,,,{}",
                    params.join(","),
                    csv_escape(&e.to_string())
                )
            }
        };
        csv.push_str(&line);
        csv.push('\n');
    }
    let files = vec![out.write("sweep.csv", &csv)?];
    let summary = format!(
        "sweep: {} points, {ok} ran, {} failed\n",
        points.len(),
        points.len() - ok
    );
    let status = if ok > 0 {
        ExitStatus::Success
    } else {
        ExitStatus::SolverFailure
    };
    Ok(Outcome {
        status,
        summary,
        files,
    })
}
