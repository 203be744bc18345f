//! Gronwall fit `H(t) <= H(0) exp(C t)` for a relative-entropy series.

use crate::error::{Error, Result};

/// Floor added before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GronwallBranch {
    /// `H(0) > tol0`: check the exponential envelope with the fitted rate.
    Exponential,
    /// `H(0) <= tol0`: check `H <= tol` throughout.
    Uniqueness,
}

impl GronwallBranch {
    pub fn name(self) -> &'static str {
        match self {
            GronwallBranch::Exponential => "exponential",
            GronwallBranch::Uniqueness => "uniqueness",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GronwallFit {
    /// Least-squares slope of `log(H + floor)` against `t`.
    pub c_hat: f64,
    /// Root-mean-square residual of the log fit.
    pub fit_residual: f64,
    /// All samples at or below `tol0`; the slope carries no information.
    pub degenerate: bool,
    pub branch: GronwallBranch,
    pub satisfied: bool,
    /// `min_t (bound(t) - H(t))`; negative when violated.
    pub margin: f64,
    /// Smallest rate `C` with `H(t) <= H(0) e^{C t} + tol` at every sample;
    /// `None` on the uniqueness branch.
    pub envelope_rate: Option<f64>,
    pub tol: f64,
}

/// Fits and checks the Gronwall envelope. `tol` bounds the series on the
/// uniqueness branch and pads the envelope; `tol0` decides the branch.
pub fn gronwall_probe(times: &[f64], values: &[f64], tol: f64, tol0: f64) -> Result<GronwallFit> {
    if times.len() != values.len() {
        return Err(Error::invalid("times and values differ in length"));
    }
    if times.len() < 3 {
        return Err(Error::invalid(format!(
            "Gronwall fit needs at least 3 samples, got {}",
            times.len()
        )));
    }
    if values
        .iter()
        .any(|h| !(h.is_finite() && *h >= -tol.max(0.0)))
    {
        return Err(Error::invalid(
            "series values must be finite and nonnegative",
        ));
    }
    let m = times.len() as f64;
    let ys: Vec<f64> = values
        .iter()
        .map(|h| (h.max(0.0) + LOG_FLOOR).ln())
        .collect();
    let tm = times.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let sxx: f64 = times.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = times
        .iter()
        .zip(&ys)
        .map(|(t, y)| (t - tm) * (y - ym))
        .sum();
    let c_hat = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = ym - c_hat * tm;
    let fit_residual = (times
        .iter()
        .zip(&ys)
        .map(|(t, y)| (y - intercept - c_hat * t).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    let degenerate = values.iter().all(|h| *h <= tol0);

    let h0 = values[0];
    let t0 = times[0];
    if h0 <= tol0 {
        let margin = values.iter().map(|h| tol - h).fold(f64::INFINITY, f64::min);
        return Ok(GronwallFit {
            c_hat,
            fit_residual,
            degenerate,
            branch: GronwallBranch::Uniqueness,
            satisfied: margin >= 0.0,
            margin,
            envelope_rate: None,
            tol,
        });
    }
    let margin = times
        .iter()
        .zip(values)
        .map(|(t, h)| h0 * (c_hat * (t - t0)).exp() + tol - h)
        .fold(f64::INFINITY, f64::min);
    let envelope = times
        .iter()
        .zip(values)
        .filter(|(t, h)| **t > t0 && **h > tol)
        .map(|(t, h)| ((h - tol) / h0).ln() / (t - t0))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GronwallFit {
        c_hat,
        fit_residual,
        degenerate,
        branch: GronwallBranch::Exponential,
        satisfied: margin >= 0.0,
        margin,
        envelope_rate: Some(if envelope.is_finite() {
            envelope
        } else {
            f64::NEG_INFINITY
        }),
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exponential_rate() {
        let t: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let h: Vec<f64> = t.iter().map(|t| 0.01 * (2.0 * t).exp()).collect();
        let fit = gronwall_probe(&t, &h, 1e-12, 1e-12).unwrap();
        assert!((fit.c_hat - 2.0).abs() < 1e-6);
        assert_eq!(fit.branch, GronwallBranch::Exponential);
        assert!(fit.satisfied && !fit.degenerate);
        assert!((fit.envelope_rate.unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn zero_series_takes_uniqueness_branch() {
        let t = [0.0, 0.5, 1.0, 1.5];
        let fit = gronwall_probe(&t, &[0.0; 4], 1e-12, 1e-12).unwrap();
        assert!(fit.degenerate && fit.satisfied);
        assert_eq!(fit.branch, GronwallBranch::Uniqueness);
    }

    #[test]
    fn growth_from_zero_is_flagged() {
        let t = [0.0, 0.5, 1.0, 1.5];
        let fit = gronwall_probe(&t, &t, 1e-12, 1e-12).unwrap();
        assert_eq!(fit.branch, GronwallBranch::Uniqueness);
        assert!(!fit.satisfied && fit.margin < 0.0);
    }

    #[test]
    fn needs_three_samples() {
        assert!(gronwall_probe(&[0.0, 1.0], &[1.0, 1.0], 0.0, 0.0).is_err());
    }
}
