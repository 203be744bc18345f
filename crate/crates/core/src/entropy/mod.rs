//! Entropy densities and (cutoff) relative entropies on cell fields.

pub mod cutoff;

pub use cutoff::{
    cutoff_grad, cutoff_hess, cutoff_value, Cutoff, CutoffJet, CutoffProfile, CutoffSpec,
};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::solver::Field;

/// `s log s`, continuous at 0.
pub fn xlogx(s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s * s.ln()
    }
}

fn check_vector(spec: &ModelSpec, u: &[f64]) -> Result<()> {
    if u.len() != spec.n() {
        return Err(Error::invalid(format!(
            "expected {} species, got {}",
            spec.n(),
            u.len()
        )));
    }
    if let Some(i) = u.iter().position(|x| !(*x >= 0.0 && x.is_finite())) {
        return Err(Error::invalid(format!(
            "density u_{} = {} is not nonnegative",
            i, u[i]
        )));
    }
    Ok(())
}

fn check_pair(spec: &ModelSpec, u: &Field, v: &Field) -> Result<()> {
    u.same_layout(v)?;
    if u.n() != spec.n() {
        return Err(Error::invalid(format!(
            "fields carry {} species, model has {}",
            u.n(),
            spec.n()
        )));
    }
    if let Some(k) = v.data().iter().position(|x| *x <= 0.0) {
        return Err(Error::invalid(format!(
            "reference density is nonpositive in cell {} species {}",
            k / v.n(),
            k % v.n()
        )));
    }
    Ok(())
}

/// `h(u) = sum_i pi_i [u_i (log u_i - 1 + lambda_i) + exp(-lambda_i)]`.
pub fn entropy_density(spec: &ModelSpec, u: &[f64]) -> Result<f64> {
    check_vector(spec, u)?;
    Ok(entropy_density_unchecked(spec, u))
}

pub(crate) fn entropy_density_unchecked(spec: &ModelSpec, u: &[f64]) -> f64 {
    u.iter()
        .zip(spec.pi())
        .zip(spec.lambda())
        .map(|((&ui, &p), &l)| p * (xlogx(ui) + ui * (l - 1.0) + (-l).exp()))
        .sum()
}

/// Cell-sum of `h(u)`.
pub fn total_entropy(spec: &ModelSpec, u: &Field) -> Result<f64> {
    if u.n() != spec.n() {
        return Err(Error::invalid(
            "field and model disagree on the species count",
        ));
    }
    let dx = u.grid().cell_measure();
    Ok(u.cells()
        .map(|c| entropy_density_unchecked(spec, c))
        .sum::<f64>()
        * dx)
}

/// Pointwise `sum_i pi_i [u_i (log u_i - 1) - u_i log v_i + v_i]`,
/// arranged so that `u = v` gives exactly 0.
pub fn relative_entropy_density(pi: &[f64], u: &[f64], v: &[f64]) -> f64 {
    (0..u.len())
        .map(|i| {
            let gap = if u[i] > 0.0 {
                u[i] * (u[i].ln() - v[i].ln())
            } else {
                0.0
            };
            pi[i] * (gap - (u[i] - v[i]))
        })
        .sum()
}

/// `H(u|v)`, cell-sum quadrature.
pub fn relative_entropy(spec: &ModelSpec, u: &Field, v: &Field) -> Result<f64> {
    check_pair(spec, u, v)?;
    let dx = u.grid().cell_measure();
    let s: f64 = u
        .cells()
        .zip(v.cells())
        .map(|(a, b)| relative_entropy_density(spec.pi(), a, b))
        .sum();
    Ok(s * dx)
}

/// Integrand of `H_K^L` for a given cutoff value `phi = phi_K^L(u)`.
pub fn cutoff_integrand(spec: &ModelSpec, phi: f64, u: &[f64], v: &[f64]) -> f64 {
    let (pi, lambda) = (spec.pi(), spec.lambda());
    // u (log u - log v) + (1 - phi) u (log v + lambda) - (u - v): exact 0
    // for u = v on the plateau
    (0..u.len())
        .map(|i| {
            let t = if u[i] > 0.0 {
                let lv = v[i].ln();
                u[i] * ((u[i].ln() - lv) + (1.0 - phi) * (lv + lambda[i]))
            } else {
                0.0
            };
            pi[i] * (t - (u[i] - v[i]))
        })
        .sum()
}

/// `H_K^L(u|v) = sum_cells |cell| sum_i pi_i [u_i(log u_i + lambda_i - 1)
///   - phi_K^L(u) u_i (log v_i + lambda_i) + v_i]`.
pub fn cutoff_relative_entropy(
    spec: &ModelSpec,
    cut: &CutoffSpec,
    u: &Field,
    v: &Field,
) -> Result<f64> {
    check_pair(spec, u, v)?;
    let phi = cut.lower();
    let dx = u.grid().cell_measure();
    let s: f64 = u
        .cells()
        .zip(v.cells())
        .map(|(a, b)| cutoff_integrand(spec, phi.value(a), a, b))
        .sum();
    Ok(s * dx)
}

/// Pointwise integrand of the doubly regularized functional at `u`, `v`.
pub fn double_cutoff_integrand(
    spec: &ModelSpec,
    upper: &Cutoff,
    lower: &Cutoff,
    eps: f64,
    u: &[f64],
    v: &[f64],
) -> f64 {
    let (pi, lambda) = (spec.pi(), spec.lambda());
    let s: f64 = u.iter().sum::<f64>() + eps * u.len() as f64;
    let (pm, pl) = (upper.value_of_sum(s), lower.value_of_sum(s));
    (0..u.len())
        .map(|i| {
            let ue = u[i] + eps;
            pi[i]
                * (pm * ue * (ue.ln() + lambda[i] - 1.0) - pl * ue * (v[i].ln() + lambda[i]) + v[i])
        })
        .sum()
}

/// `H_{K,eps}^{M,L}(u|v)`: the entropy part weighted by `phi_K^M(u + eps)`,
/// the cross term by `phi_K^L(u + eps)`. Does not contain the constant
/// `exp(-lambda_i)` terms; see [`cutoff_entropy_offset`].
pub fn double_cutoff_relative_entropy(
    spec: &ModelSpec,
    cut: &CutoffSpec,
    u: &Field,
    v: &Field,
) -> Result<f64> {
    cut.validate()?;
    check_pair(spec, u, v)?;
    let (upper, lower) = (cut.upper(), cut.lower());
    let dx = u.grid().cell_measure();
    let s: f64 = u
        .cells()
        .zip(v.cells())
        .map(|(a, b)| double_cutoff_integrand(spec, &upper, &lower, cut.eps, a, b))
        .sum();
    Ok(s * dx)
}

/// `sum_cells |cell| phi_K^M(u + eps) sum_i pi_i exp(-lambda_i)`.
pub fn cutoff_entropy_offset(spec: &ModelSpec, cut: &CutoffSpec, u: &Field) -> Result<f64> {
    cut.validate()?;
    let upper = cut.upper();
    let c: f64 = spec
        .pi()
        .iter()
        .zip(spec.lambda())
        .map(|(p, l)| p * (-l).exp())
        .sum();
    let shift = cut.eps * u.n() as f64;
    let dx = u.grid().cell_measure();
    Ok(c * dx
        * u.cells()
            .map(|a| upper.value_of_sum(a.iter().sum::<f64>() + shift))
            .sum::<f64>())
}

/// Elementary bounds `-(1 + 1/s)(s - 1)^2 <= log s - s + 1 <= 0`.
pub fn log_gap_bounds(s: f64) -> Result<(f64, f64, f64)> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("log gap needs s > 0, got {s}")));
    }
    let lower = -(1.0 + 1.0 / s) * (s - 1.0) * (s - 1.0);
    Ok((lower, s.ln() - s + 1.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Grid;
    use std::f64::consts::E;

    fn scalar() -> ModelSpec {
        ModelSpec::new(1, vec![1.0], vec![vec![0.0]]).unwrap()
    }

    fn one_cell(x: f64) -> Field {
        // Two cells of measure 1/2 carrying the same value act as one unit cell.
        Field::constant(Grid::line(1.0, 2).unwrap(), &[x]).unwrap()
    }

    #[test]
    fn density_examples() {
        let s = scalar();
        assert_eq!(entropy_density(&s, &[1.0]).unwrap(), 0.0);
        assert!((entropy_density(&s, &[E]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(entropy_density(&s, &[0.0]).unwrap(), 1.0);
        assert!(entropy_density(&s, &[-1.0]).is_err());
    }

    #[test]
    fn relative_entropy_examples() {
        let s = scalar();
        let v = one_cell(1.0);
        assert_eq!(relative_entropy(&s, &v, &v).unwrap(), 0.0);
        let h = relative_entropy(&s, &one_cell(2.0), &v).unwrap();
        assert!((h - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        assert_eq!(relative_entropy(&s, &one_cell(0.0), &v).unwrap(), 1.0);
        assert!(relative_entropy(&s, &v, &one_cell(0.0)).is_err());
    }

    #[test]
    fn cutoff_relative_entropy_examples() {
        let s = scalar();
        let cut = CutoffSpec::new(3, 2.0, 4.0, 0.1, CutoffProfile::Bump).unwrap();
        let v = one_cell(1.0);
        assert_eq!(cutoff_relative_entropy(&s, &cut, &v, &v).unwrap(), 0.0);
        let h = cutoff_relative_entropy(&s, &cut, &one_cell(2.0), &v).unwrap();
        assert!((h - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        let z = cutoff_relative_entropy(&s, &cut, &one_cell(0.0), &one_cell(3.0)).unwrap();
        assert_eq!(z, 3.0);
    }

    #[test]
    fn double_cutoff_examples() {
        let s = scalar();
        let v = one_cell(1.0);
        let cut = CutoffSpec::new(3, 1e6, 1e7, 0.25, CutoffProfile::Bump).unwrap();
        let h = double_cutoff_relative_entropy(&s, &cut, &one_cell(0.0), &v).unwrap();
        assert!((h - (0.25 * (0.25f64.ln() - 1.0) + 1.0)).abs() < 1e-15);
        assert_eq!(cutoff_entropy_offset(&s, &cut, &v).unwrap(), 1.0);

        let u = one_cell(1.5);
        let lim = CutoffSpec::new(3, 10.0, 1e8, 1e-8, CutoffProfile::Bump).unwrap();
        let a = double_cutoff_relative_entropy(&s, &lim, &u, &v).unwrap();
        let b = cutoff_relative_entropy(&s, &lim, &u, &v).unwrap();
        assert!((a - b).abs() < 1e-7);

        let big = (4.0 + E).powi(4);
        let far = CutoffSpec::new(3, 2.0, 4.0, 0.1, CutoffProfile::Bump).unwrap();
        let h = double_cutoff_relative_entropy(&s, &far, &one_cell(big), &v).unwrap();
        // both cutoffs vanish; only the +v term survives
        assert_eq!(h, 1.0);
    }

    #[test]
    fn log_gap_examples() {
        assert_eq!(log_gap_bounds(1.0).unwrap(), (0.0, 0.0, 0.0));
        let (lo, v, hi) = log_gap_bounds(2.0).unwrap();
        assert_eq!((lo, hi), (-1.5, 0.0));
        assert!((v - (2f64.ln() - 1.0)).abs() < 1e-15);
        let (lo, v, _) = log_gap_bounds(0.5).unwrap();
        assert_eq!(lo, -0.75);
        assert!((v + 0.193147).abs() < 1e-6);
        assert!(log_gap_bounds(0.0).is_err());
    }
}
