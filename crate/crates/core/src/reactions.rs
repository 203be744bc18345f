//! Reaction terms `f(u)` and the sampling checks on them.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::sampling::Sampling;

/// Absolute-plus-relative slack on the sign conditions.
pub const SIGN_TOL: f64 = 1e-12;

/// Embedding-code reaction: writes `f(u)` into the output slice.
///
/// Implementations must be safe to call from several threads at once.
pub type ReactionFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum ReactionSpec {
    Zero,
    /// `f_i(u) = u_i (beta_i - sum_j gamma_ij u_j)`.
    LogisticCompetition {
        beta: Vec<f64>,
        gamma: Vec<Vec<f64>>,
    },
    /// `f_i(u) = exp(-lambda_i) - u_i`.
    LinearRelaxation {
        lambda: Vec<f64>,
    },
    UserTable {
        name: String,
        eval: ReactionFn,
    },
}

impl fmt::Debug for ReactionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReactionSpec::Zero => write!(f, "Zero"),
            ReactionSpec::LogisticCompetition { beta, gamma } => f
                .debug_struct("LogisticCompetition")
                .field("beta", beta)
                .field("gamma", gamma)
                .finish(),
            ReactionSpec::LinearRelaxation { lambda } => f
                .debug_struct("LinearRelaxation")
                .field("lambda", lambda)
                .finish(),
            ReactionSpec::UserTable { name, .. } => write!(f, "UserTable({name})"),
        }
    }
}

impl PartialEq for ReactionSpec {
    fn eq(&self, other: &Self) -> bool {
        use ReactionSpec::*;
        match (self, other) {
            (Zero, Zero) => true,
            (
                LogisticCompetition {
                    beta: b1,
                    gamma: g1,
                },
                LogisticCompetition {
                    beta: b2,
                    gamma: g2,
                },
            ) => b1 == b2 && g1 == g2,
            (LinearRelaxation { lambda: l1 }, LinearRelaxation { lambda: l2 }) => l1 == l2,
            (UserTable { name: n1, eval: e1 }, UserTable { name: n2, eval: e2 }) => {
                n1 == n2 && Arc::ptr_eq(e1, e2)
            }
            _ => false,
        }
    }
}

impl ReactionSpec {
    pub fn logistic(beta: Vec<f64>, gamma: Vec<Vec<f64>>) -> Result<Self> {
        let n = beta.len();
        if gamma.len() != n || gamma.iter().any(|row| row.len() != n) {
            return Err(Error::invalid("logistic gamma must be n x n"));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("logistic beta must be finite"));
        }
        if gamma
            .iter()
            .flatten()
            .any(|g| !(g.is_finite() && *g >= 0.0))
        {
            return Err(Error::invalid(
                "logistic gamma must be finite and nonnegative",
            ));
        }
        Ok(ReactionSpec::LogisticCompetition { beta, gamma })
    }

    pub fn linear_relaxation(lambda: &[f64]) -> Self {
        ReactionSpec::LinearRelaxation {
            lambda: lambda.to_vec(),
        }
    }

    pub fn user(name: impl Into<String>, eval: ReactionFn) -> Self {
        ReactionSpec::UserTable {
            name: name.into(),
            eval,
        }
    }

    /// Short identifier used in configs and reports.
    pub fn kind(&self) -> &str {
        match self {
            ReactionSpec::Zero => "zero",
            ReactionSpec::LogisticCompetition { .. } => "logistic",
            ReactionSpec::LinearRelaxation { .. } => "linear_relaxation",
            ReactionSpec::UserTable { name, .. } => name,
        }
    }

    /// Species count the parameters were built for, if the variant fixes one.
    pub fn species(&self) -> Option<usize> {
        match self {
            ReactionSpec::LogisticCompetition { beta, .. } => Some(beta.len()),
            ReactionSpec::LinearRelaxation { lambda } => Some(lambda.len()),
            _ => None,
        }
    }

    pub fn evaluate(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("reaction input must be finite"));
        }
        if let Some(n) = self.species() {
            if n != u.len() {
                return Err(Error::invalid(format!(
                    "reaction built for {n} species, got {}",
                    u.len()
                )));
            }
        }
        let mut out = vec![0.0; u.len()];
        self.eval_into(u, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation for inner loops.
    pub fn eval_into(&self, u: &[f64], out: &mut [f64]) {
        match self {
            ReactionSpec::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            ReactionSpec::LogisticCompetition { beta, gamma } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let crowd: f64 = gamma[i].iter().zip(u).map(|(g, x)| g * x).sum();
                    *o = u[i] * (beta[i] - crowd);
                }
            }
            ReactionSpec::LinearRelaxation { lambda } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (-lambda[i]).exp() - u[i];
                }
            }
            ReactionSpec::UserTable { eval, .. } => eval(u, out),
        }
    }

    /// Row-major Jacobian `d f_i / d u_j`. User reactions fall back to
    /// central differences.
    pub fn jacobian_into(&self, u: &[f64], jac: &mut [f64]) {
        let n = u.len();
        jac.iter_mut().for_each(|x| *x = 0.0);
        match self {
            ReactionSpec::Zero => {}
            ReactionSpec::LogisticCompetition { beta, gamma } => {
                for i in 0..n {
                    let crowd: f64 = gamma[i].iter().zip(u).map(|(g, x)| g * x).sum();
                    for j in 0..n {
                        jac[i * n + j] = -u[i] * gamma[i][j];
                    }
                    jac[i * n + i] += beta[i] - crowd;
                }
            }
            ReactionSpec::LinearRelaxation { .. } => {
                for i in 0..n {
                    jac[i * n + i] = -1.0;
                }
            }
            ReactionSpec::UserTable { eval, .. } => {
                let mut up = u.to_vec();
                let mut fp = vec![0.0; n];
                let mut fm = vec![0.0; n];
                for j in 0..n {
                    let h = 1e-7 * (1.0 + u[j].abs());
                    let base = up[j];
                    // stay inside [0, inf)
                    let lo = (base - h).max(0.0);
                    let hi = base + h;
                    up[j] = hi;
                    eval(&up, &mut fp);
                    up[j] = lo;
                    eval(&up, &mut fm);
                    up[j] = base;
                    for i in 0..n {
                        jac[i * n + j] = (fp[i] - fm[i]) / (hi - lo);
                    }
                }
            }
        }
    }
}

/// Outcome of the entropy-dissipation sampling check.
#[derive(Clone, Debug, PartialEq)]
pub struct DissipationCheck {
    pub passed: bool,
    pub samples: usize,
    /// Largest `sum_i pi_i f_i(u) (log u_i + lambda_i)` seen.
    pub worst_value: f64,
    pub worst_point: Vec<f64>,
}

/// Samples `S(u) = sum_i pi_i f_i(u)(log u_i + lambda_i)` and requires
/// `S(u) <= tol (1 + |u|^2)` everywhere.
pub fn entropy_dissipation_check(spec: &ModelSpec, sampling: &Sampling) -> DissipationCheck {
    let n = spec.n();
    let mut f = vec![0.0; n];
    let mut worst_value = f64::NEG_INFINITY;
    let mut worst_point = Vec::new();
    let mut passed = true;
    for u in sampling.points(n) {
        spec.reaction().eval_into(&u, &mut f);
        let s: f64 = (0..n)
            .map(|i| spec.pi()[i] * f[i] * (u[i].ln() + spec.lambda()[i]))
            .sum();
        let norm2: f64 = u.iter().map(|x| x * x).sum();
        if !(s <= SIGN_TOL * (1.0 + norm2)) {
            passed = false;
        }
        if s > worst_value || worst_point.is_empty() {
            worst_value = s;
            worst_point = u;
        }
    }
    DissipationCheck {
        passed,
        samples: sampling.count,
        worst_value,
        worst_point,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuasiPositivityViolation {
    pub species: usize,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuasiPositivityReport {
    pub passed: bool,
    pub samples: usize,
    /// Smallest `f_i(u)` over samples with `u_i = 0`.
    pub worst_value: f64,
    pub violations: Vec<QuasiPositivityViolation>,
}

/// Checks `f_i(u) >= -tol` on samples with `u_i = 0`, for every species.
pub fn quasi_positivity_check(
    reaction: &ReactionSpec,
    n: usize,
    sampling: &Sampling,
) -> QuasiPositivityReport {
    let mut f = vec![0.0; n];
    let mut worst_value = f64::INFINITY;
    let mut violations = Vec::new();
    let points = sampling.points(n);
    for i in 0..n {
        for p in &points {
            let mut u = p.clone();
            u[i] = 0.0;
            reaction.eval_into(&u, &mut f);
            worst_value = worst_value.min(f[i]);
            if !(f[i] >= -SIGN_TOL) {
                violations.push(QuasiPositivityViolation {
                    species: i,
                    point: u,
                    value: f[i],
                });
            }
        }
    }
    QuasiPositivityReport {
        passed: violations.is_empty(),
        samples: points.len() * n,
        worst_value,
        violations,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MassGrowthStatus {
    /// `sum_i f_i(u) >= 0` on every sample with `sum u >= m0`.
    Holds {
        m0: u64,
    },
    /// No `M0` in range, but `|sum f| <= C (1 + |u|^p)` with `p = 2 + 2/d`.
    GrowthAlternative {
        p: f64,
        constant: f64,
        exponent: f64,
    },
    Fail {
        p: f64,
        exponent: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MassGrowthCheck {
    pub status: MassGrowthStatus,
    pub samples: usize,
    /// Largest total density at which `sum f < -tol` was observed.
    pub last_violation: Option<f64>,
}

impl MassGrowthCheck {
    pub fn accepted(&self) -> bool {
        !matches!(self.status, MassGrowthStatus::Fail { .. })
    }
}

/// Searches the smallest integer `M0 <= sampling.m0_search_max` with
/// `sum_i f_i(u) >= -tol` whenever `sum u >= M0`; otherwise fits the growth
/// exponent of `|sum f|` and compares it with `p = 2 + 2/d`.
pub fn mass_growth_check(
    reaction: &ReactionSpec,
    n: usize,
    d: usize,
    sampling: &Sampling,
) -> MassGrowthCheck {
    let points = sampling.points(n);
    let mut f = vec![0.0; n];
    let mut rows = Vec::with_capacity(points.len());
    for u in &points {
        reaction.eval_into(u, &mut f);
        let total: f64 = u.iter().sum();
        let sum_f: f64 = f.iter().sum();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        rows.push((total, sum_f, norm));
    }
    let tol = |total: f64| SIGN_TOL * (1.0 + total);
    let last_violation = rows
        .iter()
        .filter(|(t, s, _)| *s < -tol(*t))
        .map(|r| r.0)
        .fold(None, |acc: Option<f64>, t| {
            Some(acc.map_or(t, |a| a.max(t)))
        });
    let max_total = rows.iter().map(|r| r.0).fold(0.0, f64::max);

    let candidate = match last_violation {
        None => Some(0u64),
        Some(v) => {
            let m0 = v.floor() as u64 + 1;
            // a candidate must still have samples above it to be meaningful
            (m0 <= sampling.m0_search_max && (m0 as f64) < max_total).then_some(m0)
        }
    };
    let p = 2.0 + 2.0 / d as f64;
    let status = match candidate {
        Some(m0) => MassGrowthStatus::Holds { m0 },
        None => {
            let exponent = growth_exponent(&rows);
            let constant = rows
                .iter()
                .map(|(_, s, norm)| s.abs() / (1.0 + norm.powf(p)))
                .fold(0.0, f64::max);
            if exponent <= p + 0.05 && constant.is_finite() {
                MassGrowthStatus::GrowthAlternative {
                    p,
                    constant,
                    exponent,
                }
            } else {
                MassGrowthStatus::Fail { p, exponent }
            }
        }
    };
    MassGrowthCheck {
        status,
        samples: points.len(),
        last_violation,
    }
}

/// Least-squares slope of the per-decade envelope of `log|sum f|` against
/// `log|u|`, over samples with `|u| >= 1`.
fn growth_exponent(rows: &[(f64, f64, f64)]) -> f64 {
    use std::collections::BTreeMap;
    let mut envelope: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for &(_, s, norm) in rows {
        if norm < 1.0 || s == 0.0 {
            continue;
        }
        let decade = (norm.log10() * 2.0).floor() as i64;
        let e = envelope.entry(decade).or_insert((norm, 0.0));
        if s.abs() > e.1 {
            *e = (norm, s.abs());
        }
    }
    let pts: Vec<(f64, f64)> = envelope
        .values()
        .filter(|(_, s)| *s > 0.0)
        .map(|(x, s)| (x.ln(), s.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Empirical Lipschitz constant of `f` on `[0, R]^n`: the largest
/// `|f(u) - f(w)| / |u - w|` over sampled pairs. Half of the pairs are
/// close neighbours to probe local slopes.
pub fn lipschitz_estimate(reaction: &ReactionSpec, n: usize, sampling: &Sampling) -> f64 {
    use rand::Rng;
    let mut rng = sampling.rng();
    let r = sampling.box_radius;
    let mut fu = vec![0.0; n];
    let mut fw = vec![0.0; n];
    let mut best = 0.0f64;
    for k in 0..sampling.count {
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=r)).collect();
        let w: Vec<f64> = if k % 2 == 0 {
            (0..n).map(|_| rng.gen_range(0.0..=r)).collect()
        } else {
            u.iter()
                .map(|x| (x + rng.gen_range(-1e-3..=1e-3) * r).clamp(0.0, r))
                .collect()
        };
        let du = u
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if du == 0.0 {
            continue;
        }
        reaction.eval_into(&u, &mut fu);
        reaction.eval_into(&w, &mut fw);
        let df = fu
            .iter()
            .zip(&fw)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        best = best.max(df / du);
    }
    best
}
