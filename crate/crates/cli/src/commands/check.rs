use crate::commands::{hypothesis_report, CliError, ExitStatus, Outcome, Output};
use crate::config::RunConfig;

/// Writes `check_report.txt` and `check_report.csv`; exit 2 when a required
/// hypothesis fails.
pub fn run(cfg: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    let spec = cfg.model_spec()?;
    let report = hypothesis_report(cfg, &spec)?;
    let text = report.to_text();
    let files = vec![
        out.write("check_report.txt", &text)?,
        out.write("check_report.csv", &report.to_csv())?,
    ];
    let status = if report.required_pass() {
        ExitStatus::Success
    } else {
        ExitStatus::HypothesisFailure
    };
    Ok(Outcome {
        status,
        summary: text,
        files,
    })
}
