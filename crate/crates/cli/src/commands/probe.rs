use skt_core::audit::{weak_strong_probe, ProbeConfig, ProbeMode, ProbeOutcome};
use skt_core::model::HypothesisReport;

use crate::commands::{hypothesis_report, num, CliError, ExitStatus, Outcome, Output};
use crate::config::{ProbeModeConfig, RunConfig};

/// Key scalars of one probe, shared by `probe` and `sweep`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeScalars {
    pub h_kl_initial: f64,
    pub h_kl_max: f64,
    pub tolerance: f64,
    pub c_hat: f64,
    pub branch: &'static str,
    pub margin: f64,
    pub criterion_met: bool,
}

impl ProbeScalars {
    pub const HEADER: &'static str =
        "h_kl_initial,h_kl_max,tolerance,c_hat,branch,margin,criterion_met";

    fn from_outcome(o: &ProbeOutcome) -> Self {
        let fit = o.report.gronwall.expect("probe always attaches a fit");
        ProbeScalars {
            h_kl_initial: o.report.h_kl[0],
            h_kl_max: o.report.max_h_kl(),
            tolerance: o.tolerance,
            c_hat: fit.c_hat,
            branch: fit.branch.name(),
            margin: fit.margin,
            criterion_met: o.criterion_met,
        }
    }

    pub fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            num(self.h_kl_initial),
            num(self.h_kl_max),
            num(self.tolerance),
            num(self.c_hat),
            self.branch,
            num(self.margin),
            self.criterion_met
        )
    }
}

pub(crate) enum ProbeRun {
    /// A hypothesis the probe relies on fails; nothing was run.
    Blocked(HypothesisReport),
    Done(Box<ProbeOutcome>, HypothesisReport),
}

pub(crate) fn execute(cfg: &RunConfig) -> Result<ProbeRun, CliError> {
    let spec = cfg.model_spec()?;
    let report = hypothesis_report(cfg, &spec)?;
    if !report.probe_requirements_pass() {
        return Ok(ProbeRun::Blocked(report));
    }
    let grid = cfg.grid()?;
    let mode = match cfg.probe.mode {
        ProbeModeConfig::Manufactured => ProbeMode::Manufactured(cfg.manufactured(&spec)?),
        ProbeModeConfig::FineProxy => ProbeMode::FineProxy {
            u0: cfg.initial_field(&grid)?,
        },
    };
    let pc = ProbeConfig {
        grid,
        refinement: cfg.probe.refinement,
        cut: cfg.cutoff_spec()?,
        horizon: cfg.time.horizon,
        dt: cfg.time.dt,
        newton: cfg.newton(),
        mode,
        perturbation: cfg.probe.perturbation,
        tolerance: cfg.probe.tolerance,
    };
    let outcome = weak_strong_probe(&spec, &pc)?;
    Ok(ProbeRun::Done(Box::new(outcome), report))
}

/// Scalars of the configured probe, or the exit status that stopped it.
pub fn scalars(cfg: &RunConfig) -> Result<ProbeScalars, CliError> {
    match execute(cfg)? {
        ProbeRun::Blocked(r) => Err(CliError::Hypothesis(r.to_text())),
        ProbeRun::Done(o, _) => Ok(ProbeScalars::from_outcome(&o)),
    }
}

/// Writes `probe_hypotheses.txt` and, when the probe runs, `probe_series.csv`,
/// `probe_scalars.csv` and `probe_summary.txt`. Exit 0 when the Gronwall or
/// uniqueness criterion holds, 4 when it does not.
pub fn run(cfg: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    match execute(cfg)? {
        ProbeRun::Blocked(report) => {
            let text = report.to_text();
            let files = vec![out.write("probe_hypotheses.txt", &text)?];
            Ok(Outcome {
                status: ExitStatus::HypothesisFailure,
                summary: text,
                files,
            })
        }
        ProbeRun::Done(outcome, hyp) => {
            let mut rep = outcome.report.clone();
            rep.notes.extend(hyp.to_text().lines().map(str::to_string));
            let summary = rep.summary();
            let scalars = ProbeScalars::from_outcome(&outcome);
            let files = vec![
                out.write("probe_hypotheses.txt", &hyp.to_text())?,
                out.write("probe_series.csv", &rep.to_csv())?,
                out.write(
                    "probe_scalars.csv",
                    &format!("{}\n{}\n", ProbeScalars::HEADER, scalars.csv_fields()),
                )?,
                out.write("probe_summary.txt", &summary)?,
            ];
            let status = if outcome.criterion_met {
                ExitStatus::Success
            } else {
                ExitStatus::CriterionUnmet
            };
            Ok(Outcome {
                status,
                summary,
                files,
            })
        }
    }
}
