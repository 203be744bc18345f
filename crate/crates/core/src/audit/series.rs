use std::fmt::Write as _;

use crate::audit::fischer::FischerCheck;
use crate::audit::gronwall::GronwallFit;
use crate::entropy::{
    cutoff_relative_entropy, double_cutoff_relative_entropy, relative_entropy, total_entropy,
    CutoffSpec,
};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::solver::{StrongProxy, Trajectory};

/// Entropy time series of a run against a reference, plus attached fits.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EntropyReport {
    pub times: Vec<f64>,
    /// `sum_cells |cell| h(u)`.
    pub entropy: Vec<f64>,
    pub h_rel: Vec<f64>,
    pub h_kl: Vec<f64>,
    pub h_keps: Vec<f64>,
    /// `masses[k][i]`.
    pub masses: Vec<Vec<f64>>,
    pub min_u: Vec<f64>,
    pub max_u: Vec<f64>,
    pub gronwall: Option<GronwallFit>,
    pub fischer: Option<FischerCheck>,
    /// Discretization tolerance the series is judged against.
    pub tolerance: Option<f64>,
    /// Free-form lines appended to the summary (hypothesis statuses etc.).
    pub notes: Vec<String>,
}

impl EntropyReport {
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_h_kl(&self) -> f64 {
        self.h_kl.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        [
            &self.times,
            &self.entropy,
            &self.h_rel,
            &self.h_kl,
            &self.h_keps,
            &self.min_u,
            &self.max_u,
        ]
        .iter()
        .all(|s| s.iter().all(|x| x.is_finite()))
            && self.masses.iter().flatten().all(|x| x.is_finite())
    }

    pub fn to_csv(&self) -> String {
        let n = self.masses.first().map_or(0, Vec::len);
        let mut out = String::from("t,entropy,H_rel,H_KL,H_KepsML");
        for i in 1..=n {
            let _ = write!(out, ",mass_{i}");
        }
        out.push_str(",min_u,max_u\n");
        for k in 0..self.len() {
            let _ = write!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[k], self.entropy[k], self.h_rel[k], self.h_kl[k], self.h_keps[k]
            );
            for m in &self.masses[k] {
                let _ = write!(out, ",{m:.16e}");
            }
            let _ = writeln!(out, ",{:.16e},{:.16e}", self.min_u[k], self.max_u[k]);
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "snapshots: {}", self.len());
        if let (Some(a), Some(b)) = (self.times.first(), self.times.last()) {
            let _ = writeln!(out, "time window: [{a:.6e}, {b:.6e}]");
        }
        if !self.h_kl.is_empty() {
            let _ = writeln!(
                out,
                "H_KL: initial {:.6e}, max {:.6e}",
                self.h_kl[0],
                self.max_h_kl()
            );
        }
        if let Some(t) = self.tolerance {
            let _ = writeln!(out, "tolerance: {t:.6e}");
        }
        if let Some(g) = &self.gronwall {
            let _ = writeln!(out, "gronwall branch: {}", g.branch.name());
            let _ = writeln!(
                out,
                "gronwall C_hat: {:.6e} (fit rms {:.3e})",
                g.c_hat, g.fit_residual
            );
            if let Some(r) = g.envelope_rate {
                let _ = writeln!(out, "gronwall envelope rate: {r:.6e}");
            }
            let _ = writeln!(out, "gronwall degenerate: {}", g.degenerate);
            let _ = writeln!(
                out,
                "gronwall satisfied: {} (margin {:.3e})",
                g.satisfied, g.margin
            );
        }
        if let Some(f) = &self.fischer {
            let _ = writeln!(out, "fischer L: {:.6e}", f.l_found);
            let _ = writeln!(
                out,
                "fischer ineq1: {} (margin {:.3e})",
                f.ineq1_ok, f.margin1
            );
            let _ = writeln!(
                out,
                "fischer ineq2: {} (margin {:.3e})",
                f.ineq2_ok, f.margin2
            );
        }
        for n in &self.notes {
            let _ = writeln!(out, "{n}");
        }
        out
    }
}

/// Entropy series of `traj_u` against `proxy` evaluated on the grid of `u`.
pub fn relative_entropy_series(
    spec: &ModelSpec,
    cut: &CutoffSpec,
    traj_u: &Trajectory,
    proxy: &StrongProxy,
) -> Result<EntropyReport> {
    cut.validate()?;
    let grid = traj_u.first().grid().clone();
    let mut rep = EntropyReport::default();
    for (t, u) in traj_u.times().iter().zip(traj_u.states()) {
        let v = proxy.at(&grid, *t)?;
        if v.min() <= 0.0 {
            return Err(Error::invalid(format!(
                "reference density is nonpositive at t = {t}"
            )));
        }
        rep.times.push(*t);
        rep.entropy.push(total_entropy(spec, u)?);
        rep.h_rel.push(relative_entropy(spec, u, &v)?);
        rep.h_kl.push(cutoff_relative_entropy(spec, cut, u, &v)?);
        rep.h_keps
            .push(double_cutoff_relative_entropy(spec, cut, u, &v)?);
        rep.masses.push(u.masses());
        rep.min_u.push(u.min());
        rep.max_u.push(u.max());
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::CutoffProfile;
    use crate::solver::{Field, Grid, ManufacturedSolution};

    #[test]
    fn identical_runs_give_zero_series() {
        let spec = ModelSpec::new(1, vec![1.0], vec![vec![0.5]]).unwrap();
        let m = ManufacturedSolution::new(&spec, &[1.0], &[2.0], &[0.5]).unwrap();
        let g = Grid::line(1.0, 8).unwrap();
        let tr = m.trajectory(&g, 0.0, 0.3, 0.1).unwrap();
        let cut = CutoffSpec::new(3, 10.0, 20.0, 0.1, CutoffProfile::Bump).unwrap();
        let rep = relative_entropy_series(&spec, &cut, &tr, &StrongProxy::Manufactured(m)).unwrap();
        assert_eq!(rep.len(), 4);
        assert!(rep.h_rel.iter().chain(&rep.h_kl).all(|h| h.abs() < 1e-15));
        assert!(rep.all_finite());
        let csv = rep.to_csv();
        assert!(csv.starts_with("t,entropy,H_rel,H_KL,H_KepsML,mass_1,min_u,max_u\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn single_snapshot() {
        let spec = ModelSpec::new(1, vec![1.0], vec![vec![0.5]]).unwrap();
        let g = Grid::line(1.0, 4).unwrap();
        let tr = Trajectory::new(Field::constant(g, &[1.0]).unwrap(), 0.0);
        let m = ManufacturedSolution::new(&spec, &[1.0], &[2.0], &[0.5]).unwrap();
        let cut = CutoffSpec::new(3, 10.0, 20.0, 0.1, CutoffProfile::Bump).unwrap();
        let rep = relative_entropy_series(&spec, &cut, &tr, &StrongProxy::Manufactured(m)).unwrap();
        assert_eq!(rep.len(), 1);
    }
}
