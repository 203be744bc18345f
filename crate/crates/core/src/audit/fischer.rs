//! Large-density bounds for the cutoff relative entropy.
//!
//! For `v` in `[c, C]^n` we look for a level `L` such that every cell with
//! `sum u >= L` has `H_K^L`-integrand at least `(1 + sum u)/2` for all
//! admissible `v`. Then
//! `int_{sum u >= L} (1 + sum u) <= 2 H_K^L(u|v)` and, since `phi = 1` on
//! `{sum u <= L}`,
//! `int_{sum u <= L} |u - v|^2 <= 2 max(L, C) / min pi * H_K^L(u|v)`.

use rand::Rng;

use crate::entropy::{cutoff_relative_entropy, xlogx, Cutoff, CutoffSpec};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::sampling::{log_uniform, Sampling};
use crate::solver::{Field, Grid};

/// Geometric ladder `start * ratio^k`, `k < len`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ladder {
    pub start: f64,
    pub ratio: f64,
    pub len: usize,
}

impl Default for Ladder {
    fn default() -> Self {
        Ladder {
            start: 1.0,
            ratio: 2.0,
            len: 64,
        }
    }
}

impl Ladder {
    pub fn validate(&self) -> Result<()> {
        if !(self.start > 0.0 && self.ratio > 1.0 && self.len > 0) {
            return Err(Error::invalid(
                "ladder needs start > 0, ratio > 1 and at least one rung",
            ));
        }
        Ok(())
    }

    pub fn rungs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |k| self.start * self.ratio.powi(k as i32))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FischerCheck {
    pub l_found: f64,
    /// `int_{sum u >= L} (1 + sum u)`.
    pub lhs1: f64,
    pub h_kl: f64,
    pub ineq1_ok: bool,
    /// `2 H_K^L - lhs1`.
    pub margin1: f64,
    /// `int_{sum u <= L} sum_i |u_i - v_i|^2`.
    pub lhs2: f64,
    /// Constant the second inequality was checked with.
    pub c_l: f64,
    pub ineq2_ok: bool,
    /// `c_l H_K^L - lhs2`.
    pub margin2: f64,
}

/// `2 max(L, C) / min_i pi_i`.
pub fn analytic_c(spec: &ModelSpec, l: f64, upper: f64) -> f64 {
    let pmin = spec.pi().iter().copied().fold(f64::INFINITY, f64::min);
    2.0 * l.max(upper) / pmin
}

/// Minimum over `v in [c, C]^n` of the `H_K^L` integrand at `u`.
fn worst_integrand(spec: &ModelSpec, phi: f64, u: &[f64], (c, cc): (f64, f64)) -> f64 {
    let (pi, la) = (spec.pi(), spec.lambda());
    (0..u.len())
        .map(|i| {
            // -phi u log v + v is convex in v with minimum at v = phi u
            let vs = (phi * u[i]).clamp(c, cc);
            let g = |v: f64| -phi * u[i] * (v.ln() + la[i]) + v;
            let best = g(c).min(g(cc)).min(g(vs));
            pi[i] * (xlogx(u[i]) + u[i] * (la[i] - 1.0) + best)
        })
        .sum()
}

/// Whether every cell of `u` with `sum u >= l` satisfies the pointwise bound.
pub fn pointwise_condition(
    spec: &ModelSpec,
    cutoff: &Cutoff,
    u: &Field,
    bounds: (f64, f64),
) -> bool {
    u.cells().all(|uc| {
        let s: f64 = uc.iter().sum();
        s < cutoff.level
            || worst_integrand(spec, cutoff.value_of_sum(s), uc, bounds) >= 0.5 * (1.0 + s)
    })
}

/// Smallest rung on `ladder` for which the pointwise condition holds on
/// every field.
pub fn search_level(
    spec: &ModelSpec,
    cut: &CutoffSpec,
    fields: &[&Field],
    bounds: (f64, f64),
    ladder: &Ladder,
) -> Result<f64> {
    ladder.validate()?;
    for l in ladder.rungs() {
        let cutoff = Cutoff::new(cut.k, l, cut.profile);
        if fields
            .iter()
            .all(|u| pointwise_condition(spec, &cutoff, u, bounds))
        {
            return Ok(l);
        }
    }
    Err(Error::invalid(format!(
        "no level on the ladder up to {:.3e} satisfies the pointwise bound",
        ladder.start * ladder.ratio.powi(ladder.len as i32 - 1)
    )))
}

fn check_bounds(v: &Field, (c, cc): (f64, f64)) -> Result<()> {
    if !(c > 0.0 && c <= cc) {
        return Err(Error::invalid(format!(
            "bounds [{c}, {cc}] must satisfy 0 < c <= C"
        )));
    }
    if v.min() < c || v.max() > cc {
        return Err(Error::invalid(format!(
            "reference density leaves [{c}, {cc}]: range [{}, {}]",
            v.min(),
            v.max()
        )));
    }
    Ok(())
}

/// Both inequalities at a given level `l` with constant `c_l`.
pub fn check_at_level(
    spec: &ModelSpec,
    cut: &CutoffSpec,
    u: &Field,
    v: &Field,
    l: f64,
    c_l: f64,
) -> Result<FischerCheck> {
    let at_l = CutoffSpec {
        l,
        m: cut.m.max(2.0 * l),
        ..*cut
    };
    let h_kl = cutoff_relative_entropy(spec, &at_l, u, v)?;
    let w = u.grid().cell_measure();
    let (mut lhs1, mut lhs2) = (0.0, 0.0);
    for (uc, vc) in u.cells().zip(v.cells()) {
        let s: f64 = uc.iter().sum();
        if s >= l {
            lhs1 += (1.0 + s) * w;
        }
        if s <= l {
            lhs2 += uc.iter().zip(vc).map(|(a, b)| (a - b).powi(2)).sum::<f64>() * w;
        }
    }
    let margin1 = 2.0 * h_kl - lhs1;
    let margin2 = c_l * h_kl - lhs2;
    Ok(FischerCheck {
        l_found: l,
        lhs1,
        h_kl,
        ineq1_ok: margin1 >= 0.0,
        margin1,
        lhs2,
        c_l,
        ineq2_ok: margin2 >= 0.0,
        margin2,
    })
}

/// Searches `L` for one pair and checks both inequalities, the second with
/// the analytic constant.
pub fn fischer_bounds_check(
    spec: &ModelSpec,
    cut: &CutoffSpec,
    u: &Field,
    v: &Field,
    bounds: (f64, f64),
    ladder: &Ladder,
) -> Result<FischerCheck> {
    u.same_layout(v)?;
    check_bounds(v, bounds)?;
    let l = search_level(spec, cut, &[u], bounds, ladder)?;
    check_at_level(spec, cut, u, v, l, analytic_c(spec, l, bounds.1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FischerEnsemble {
    pub l_found: f64,
    /// `max lhs2 / H_K^L` over the ensemble.
    pub c_measured: f64,
    pub c_analytic: f64,
    /// Per-field checks with `c_l = c_measured`.
    pub checks: Vec<FischerCheck>,
}

impl FischerEnsemble {
    pub fn ineq1_all(&self) -> bool {
        self.checks.iter().all(|c| c.ineq1_ok)
    }
    pub fn ineq2_all(&self) -> bool {
        self.checks.iter().all(|c| c.ineq2_ok)
    }
    pub fn min_margin1(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.margin1)
            .fold(f64::INFINITY, f64::min)
    }
    pub fn min_margin2(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.margin2)
            .fold(f64::INFINITY, f64::min)
    }
    /// The measured constant does not exceed the analytic one.
    pub fn measured_within_analytic(&self) -> bool {
        self.c_measured <= self.c_analytic
    }
}

/// One common `L` for all pairs, `C(L)` measured as the largest ratio.
pub fn fischer_ensemble(
    spec: &ModelSpec,
    cut: &CutoffSpec,
    pairs: &[(Field, Field)],
    bounds: (f64, f64),
    ladder: &Ladder,
) -> Result<FischerEnsemble> {
    if pairs.is_empty() {
        return Err(Error::invalid("empty field ensemble"));
    }
    for (u, v) in pairs {
        u.same_layout(v)?;
        check_bounds(v, bounds)?;
    }
    let us: Vec<&Field> = pairs.iter().map(|(u, _)| u).collect();
    let l = search_level(spec, cut, &us, bounds, ladder)?;
    let raw: Vec<FischerCheck> = pairs
        .iter()
        .map(|(u, v)| check_at_level(spec, cut, u, v, l, 0.0))
        .collect::<Result<_>>()?;
    let c_measured = raw
        .iter()
        .filter(|c| c.h_kl > 0.0)
        .map(|c| c.lhs2 / c.h_kl)
        .fold(0.0, f64::max);
    let checks = raw
        .into_iter()
        .map(|mut c| {
            c.c_l = c_measured;
            c.margin2 = c_measured * c.h_kl - c.lhs2;
            c.ineq2_ok = c.margin2 >= -1e-12 * c.lhs2;
            c
        })
        .collect();
    Ok(FischerEnsemble {
        l_found: l,
        c_measured,
        c_analytic: analytic_c(spec, l, bounds.1),
        checks,
    })
}

/// Random pairs: `u` log-uniform in `[lo, hi]` per cell and species, `v`
/// uniform in `bounds`.
pub fn random_pairs(
    grid: &Grid,
    n: usize,
    count: usize,
    (lo, hi): (f64, f64),
    bounds: (f64, f64),
    seed: u64,
) -> Result<Vec<(Field, Field)>> {
    let mut rng = Sampling::new(1, lo, hi, seed)?.rng();
    let m = n * grid.num_cells();
    (0..count)
        .map(|_| {
            let u: Vec<f64> = (0..m).map(|_| log_uniform(&mut rng, lo, hi)).collect();
            let v: Vec<f64> = (0..m).map(|_| rng.gen_range(bounds.0..=bounds.1)).collect();
            Ok((
                Field::new(grid.clone(), n, u)?,
                Field::new(grid.clone(), n, v)?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::CutoffProfile;

    fn spec() -> ModelSpec {
        ModelSpec::new(1, vec![1.0, 1.0], vec![vec![1.0, 0.2], vec![0.2, 1.0]])
            .unwrap()
            .with_weights(vec![1.0, 1.0], vec![1.0, 1.0])
            .unwrap()
    }

    fn cut() -> CutoffSpec {
        CutoffSpec::new(3, 1.0, 2.0, 0.1, CutoffProfile::Bump).unwrap()
    }

    #[test]
    fn below_level_and_identical() {
        let g = Grid::line(1.0, 6).unwrap();
        let v = Field::constant(g.clone(), &[1.0, 1.5]).unwrap();
        let chk =
            fischer_bounds_check(&spec(), &cut(), &v, &v, (0.5, 2.0), &Ladder::default()).unwrap();
        assert_eq!(chk.lhs2, 0.0);
        assert!(chk.ineq1_ok && chk.ineq2_ok);
    }

    #[test]
    fn ensemble_holds() {
        let g = Grid::line(1.0, 8).unwrap();
        let pairs = random_pairs(&g, 2, 100, (1e-3, 1e3), (0.5, 2.0), 3).unwrap();
        let e = fischer_ensemble(&spec(), &cut(), &pairs, (0.5, 2.0), &Ladder::default()).unwrap();
        assert!(e.ineq1_all() && e.ineq2_all());
        assert!(
            e.measured_within_analytic(),
            "{} {}",
            e.c_measured,
            e.c_analytic
        );
    }

    #[test]
    fn rejects_out_of_range_reference() {
        let g = Grid::line(1.0, 4).unwrap();
        let u = Field::constant(g.clone(), &[1.0, 1.0]).unwrap();
        let v = Field::constant(g, &[3.0, 1.0]).unwrap();
        assert!(
            fischer_bounds_check(&spec(), &cut(), &u, &v, (0.5, 2.0), &Ladder::default()).is_err()
        );
    }
}
