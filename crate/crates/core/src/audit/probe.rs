//! Weak-strong comparison: a coarse run `u` against a reference `v`
//! started from the same (or perturbed) data.

use crate::audit::gronwall::gronwall_probe;
use crate::audit::series::{relative_entropy_series, EntropyReport};
use crate::entropy::CutoffSpec;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::solver::{
    prolong, simulate, Field, Grid, ManufacturedSolution, NewtonOptions, StrongProxy, Trajectory,
};

#[derive(Clone, Debug)]
pub enum ProbeMode {
    /// `v` is the closed-form solution; `u` is run with the same forcing.
    Manufactured(ManufacturedSolution),
    /// `v` is a run on the grid refined by `refinement` with step
    /// `dt / refinement`, started from the prolonged `u0`.
    FineProxy { u0: Field },
}

#[derive(Clone, Debug)]
pub struct ProbeConfig {
    pub grid: Grid,
    pub refinement: usize,
    pub cut: CutoffSpec,
    pub horizon: f64,
    pub dt: f64,
    pub newton: NewtonOptions,
    pub mode: ProbeMode,
    /// Relative perturbation of `u0` on `{x_1 < L_1 / 2}`.
    pub perturbation: f64,
    /// Fixed tolerance; when `None` it is the largest `H_K^L` of the same
    /// probe at half resolution (`cells / 2`, `2 dt`).
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ProbeOutcome {
    pub report: EntropyReport,
    pub tolerance: f64,
    /// Gronwall or uniqueness criterion met.
    pub criterion_met: bool,
    pub u: Trajectory,
}

fn perturbed(u0: &Field, p: f64) -> Result<Field> {
    if p == 0.0 {
        return Ok(u0.clone());
    }
    let g = u0.grid();
    let half = 0.5 * g.extents()[0];
    let n = u0.n();
    let mut data = u0.data().to_vec();
    for c in 0..g.num_cells() {
        if g.center(c)[0] < half {
            data[c * n..(c + 1) * n]
                .iter_mut()
                .for_each(|x| *x *= 1.0 + p);
        }
    }
    Field::new(g.clone(), n, data)
}

fn run(spec: &ModelSpec, cfg: &ProbeConfig) -> Result<(Trajectory, EntropyReport)> {
    if cfg.refinement == 0 {
        return Err(Error::invalid("refinement factor must be at least 1"));
    }
    if !(cfg.perturbation > -1.0 && cfg.perturbation.is_finite()) {
        return Err(Error::invalid("perturbation must exceed -1"));
    }
    let (proxy, u0, forcing_owner) = match &cfg.mode {
        ProbeMode::Manufactured(m) => (
            StrongProxy::Manufactured(m.clone()),
            m.field(&cfg.grid, 0.0)?,
            true,
        ),
        ProbeMode::FineProxy { u0 } => {
            if u0.grid() != &cfg.grid {
                return Err(Error::GridMismatch(
                    "probe initial data is not on the probe grid".into(),
                ));
            }
            let fine = cfg.grid.refined(cfg.refinement)?;
            let v0 = prolong(u0, &fine)?;
            let r = cfg.refinement as f64;
            let tv = simulate(spec, &v0, 0.0, cfg.horizon, cfg.dt / r, &cfg.newton, None)?;
            (
                StrongProxy::FineGridRun {
                    refinement: cfg.refinement,
                    trajectory: tv,
                },
                u0.clone(),
                false,
            )
        }
    };
    let u0 = perturbed(&u0, cfg.perturbation)?;
    let forcing = if forcing_owner { proxy.forcing() } else { None };
    let tu = simulate(spec, &u0, 0.0, cfg.horizon, cfg.dt, &cfg.newton, forcing)?;
    let rep = relative_entropy_series(spec, &cfg.cut, &tu, &proxy)?;
    Ok((tu, rep))
}

fn halved(cfg: &ProbeConfig) -> Result<Option<ProbeConfig>> {
    if cfg.grid.cells().iter().any(|c| c % 2 != 0 || c / 2 < 2) {
        return Ok(None);
    }
    let grid = Grid::new(
        cfg.grid.extents().to_vec(),
        cfg.grid.cells().iter().map(|c| c / 2).collect(),
    )?;
    let mode = match &cfg.mode {
        ProbeMode::Manufactured(m) => ProbeMode::Manufactured(m.clone()),
        ProbeMode::FineProxy { u0 } => ProbeMode::FineProxy {
            u0: crate::solver::restrict(u0, &grid)?,
        },
    };
    Ok(Some(ProbeConfig {
        grid,
        mode,
        dt: 2.0 * cfg.dt,
        perturbation: 0.0,
        tolerance: None,
        ..cfg.clone()
    }))
}

/// Runs the probe and judges the `H_K^L` series with the Gronwall test.
pub fn weak_strong_probe(spec: &ModelSpec, cfg: &ProbeConfig) -> Result<ProbeOutcome> {
    cfg.cut.validate()?;
    cfg.newton.validate()?;
    if !(cfg.horizon > 0.0 && cfg.dt > 0.0) || cfg.horizon < 2.0 * cfg.dt * (1.0 - 1e-12) {
        return Err(Error::invalid(
            "probe needs a horizon of at least two time steps",
        ));
    }
    let (tu, mut report) = run(spec, cfg)?;
    let tolerance = match cfg.tolerance {
        Some(t) => t,
        None => match halved(cfg)? {
            Some(h) => {
                let (_, coarse) = run(spec, &h)?;
                report.notes.push(format!(
                    "tolerance source: half-resolution run on {:?} cells",
                    h.grid.cells()
                ));
                coarse.max_h_kl().max(0.0)
            }
            None => {
                report
                    .notes
                    .push("tolerance source: newton tolerance".into());
                10.0 * cfg.newton.tol * (1.0 + report.max_h_kl().abs())
            }
        },
    };
    let fit = gronwall_probe(&report.times, &report.h_kl, tolerance, tolerance)?;
    report.tolerance = Some(tolerance);
    report.gronwall = Some(fit);
    report.notes.push(format!(
        "mode: {}",
        match cfg.mode {
            ProbeMode::Manufactured(_) => "manufactured",
            ProbeMode::FineProxy { .. } => "fine_proxy",
        }
    ));
    Ok(ProbeOutcome {
        report,
        tolerance,
        criterion_met: fit.satisfied,
        u: tu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::GronwallBranch;
    use crate::entropy::CutoffProfile;

    fn spec() -> ModelSpec {
        ModelSpec::new(1, vec![1.0, 1.0], vec![vec![0.5, 0.2], vec![0.3, 0.5]]).unwrap()
    }

    fn base(mode: ProbeMode, cells: usize) -> ProbeConfig {
        ProbeConfig {
            grid: Grid::line(1.0, cells).unwrap(),
            refinement: 1,
            cut: CutoffSpec::new(3, 10.0, 20.0, 0.1, CutoffProfile::Bump).unwrap(),
            horizon: 0.1,
            dt: 0.01,
            newton: NewtonOptions::default(),
            mode,
            perturbation: 0.0,
            tolerance: None,
        }
    }

    #[test]
    fn same_grid_runs_agree_exactly() {
        let g = Grid::line(1.0, 16).unwrap();
        let u0 = Field::from_fn(g, 2, |x, o| {
            o[0] = 1.0 + 0.3 * x[0];
            o[1] = 2.0 - 0.5 * x[0];
        })
        .unwrap();
        let out = weak_strong_probe(&spec(), &base(ProbeMode::FineProxy { u0 }, 16)).unwrap();
        assert!(out.report.h_kl.iter().all(|h| *h == 0.0));
        assert!(out.criterion_met);
    }

    #[test]
    fn manufactured_identical_data() {
        let m = ManufacturedSolution::new(&spec(), &[1.0], &[1.0, 2.0], &[0.3, -0.5]).unwrap();
        let out = weak_strong_probe(&spec(), &base(ProbeMode::Manufactured(m), 32)).unwrap();
        assert_eq!(
            out.report.gronwall.unwrap().branch,
            GronwallBranch::Uniqueness
        );
        assert!(out.criterion_met, "{}", out.report.summary());
    }

    #[test]
    fn perturbed_start_is_positive() {
        let m = ManufacturedSolution::new(&spec(), &[1.0], &[1.0, 2.0], &[0.3, -0.5]).unwrap();
        let mut cfg = base(ProbeMode::Manufactured(m), 32);
        cfg.perturbation = 0.1;
        let out = weak_strong_probe(&spec(), &cfg).unwrap();
        assert!(out.report.h_kl[0] > out.tolerance);
        assert_eq!(
            out.report.gronwall.unwrap().branch,
            GronwallBranch::Exponential
        );
    }
}
