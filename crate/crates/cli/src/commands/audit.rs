use std::fmt::Write as _;

use skt_core::audit::{entropy_balance_terms, EntropyBalanceTerms};
use skt_core::solver::{simulate, ManufacturedSolution, StrongProxy};
use skt_core::{Grid, ModelSpec};

use crate::commands::{num, CliError, ExitStatus, Outcome, Output};
use crate::config::RunConfig;

/// Balance terms for the forced run against the manufactured reference with
/// the grid refined by `factor` and the step divided by it.
fn level(
    cfg: &RunConfig,
    spec: &ModelSpec,
    m: &ManufacturedSolution,
    factor: usize,
) -> Result<EntropyBalanceTerms, CliError> {
    let cells = cfg.grid.cells.iter().map(|c| c * factor).collect();
    let grid = Grid::new(cfg.grid.extents.clone(), cells)?;
    let window = cfg.window();
    let u0 = m.field(&grid, 0.0)?;
    let dt = cfg.time.dt / factor as f64;
    let tu = simulate(spec, &u0, 0.0, window.1, dt, &cfg.newton(), Some(m))?;
    Ok(entropy_balance_terms(
        spec,
        &cfg.cutoff_spec()?,
        &tu,
        &StrongProxy::Manufactured(m.clone()),
        window,
    )?)
}

/// Writes `audit_terms.csv` and `audit_summary.txt`, plus `audit_ladder.csv`
/// with observed residual orders when `audit.refinements` is set.
pub fn run(cfg: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    let spec = cfg.model_spec()?;
    let m = cfg.manufactured(&spec)?;
    let base = level(cfg, &spec, &m, 1)?;

    let mut summary = String::new();
    let (a, b) = base.window;
    let _ = writeln!(summary, "window: [{}, {}]", num(a), num(b));
    let _ = writeln!(summary, "entropy change: {}", num(base.lhs()));
    let _ = writeln!(summary, "sum of terms: {}", num(base.rhs()));
    let _ = writeln!(summary, "residual: {}", num(base.residual));
    let mut files = vec![out.write("audit_terms.csv", &base.to_csv())?];

    if !cfg.audit.refinements.is_empty() {
        let mut csv = String::from("factor,cells,dt,residual,order\n");
        let mut prev: Option<(usize, f64)> = None;
        let mut orders = Vec::new();
        for &f in &cfg.audit.refinements {
            let terms = level(cfg, &spec, &m, f)?;
            let r = terms.residual.abs();
            let order = prev.map(|(pf, pr)| (pr / r).ln() / (f as f64 / pf as f64).ln());
            if let Some(o) = order {
                orders.push(o);
            }
            let _ = writeln!(
                csv,
                "{f},{},{},{},{}",
                cfg.grid.cells[0] * f,
                num(cfg.time.dt / f as f64),
                num(terms.residual),
                order.map(num).unwrap_or_default()
            );
            prev = Some((f, r));
        }
        files.push(out.write("audit_ladder.csv", &csv)?);
        if let Some(min) = orders.iter().copied().reduce(f64::min) {
            let _ = writeln!(
                summary,
                "observed residual order (min over ladder): {min:.4}"
            );
        }
    }
    files.push(out.write("audit_summary.txt", &summary)?);
    Ok(Outcome {
        status: ExitStatus::Success,
        summary,
        files,
    })
}
