//! Model parameterization, the SKT diffusion matrix and the structural
//! hypotheses on its coefficients.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::reactions::{self, DissipationCheck, MassGrowthCheck, MassGrowthStatus, ReactionSpec};
use crate::sampling::Sampling;

/// Relative tolerance for accepting detailed balance on user input.
pub const DETAILED_BALANCE_RTOL: f64 = 1e-12;

/// All coefficients of an `n`-species system in `d` space dimensions.
///
/// Construct with [`ModelSpec::new`] and refine with the `with_*` methods;
/// every step validates its inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    n: usize,
    d: usize,
    a0: Vec<f64>,
    /// Row-major `n x n`.
    a: Vec<f64>,
    pi: Vec<f64>,
    lambda: Vec<f64>,
    /// Row-major `n x d`, one constant drift vector per species.
    drift: Vec<f64>,
    drift_bound: f64,
    reaction: ReactionSpec,
}

impl ModelSpec {
    /// Spec with `pi = 1`, `lambda = 0`, no drift and no reaction.
    pub fn new(d: usize, a0: Vec<f64>, a: Vec<Vec<f64>>) -> Result<Self> {
        let n = a0.len();
        if n == 0 {
            return Err(Error::invalid("species count must be at least 1"));
        }
        if d != 1 && d != 2 {
            return Err(Error::invalid(format!("dimension must be 1 or 2, got {d}")));
        }
        if a.len() != n || a.iter().any(|row| row.len() != n) {
            return Err(Error::invalid(format!(
                "cross-diffusion matrix must be {n} x {n}"
            )));
        }
        if a0.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::invalid("a0 entries must be finite and nonnegative"));
        }
        if a.iter().flatten().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::invalid("a entries must be finite and nonnegative"));
        }
        Ok(ModelSpec {
            n,
            d,
            a0,
            a: a.into_iter().flatten().collect(),
            pi: vec![1.0; n],
            lambda: vec![0.0; n],
            drift: vec![0.0; n * d],
            drift_bound: 0.0,
            reaction: ReactionSpec::Zero,
        })
    }

    pub fn with_weights(mut self, pi: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        if pi.len() != self.n || lambda.len() != self.n {
            return Err(Error::invalid("pi and lambda must have n entries"));
        }
        if pi.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::invalid("pi entries must be positive and finite"));
        }
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::invalid("lambda entries must be finite"));
        }
        self.pi = pi;
        self.lambda = lambda;
        Ok(self)
    }

    /// One drift vector of length `d` per species.
    pub fn with_drift(mut self, b: Vec<Vec<f64>>) -> Result<Self> {
        if b.len() != self.n || b.iter().any(|row| row.len() != self.d) {
            return Err(Error::invalid(format!(
                "drift must be {} x {}",
                self.n, self.d
            )));
        }
        if b.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("drift entries must be finite"));
        }
        self.drift = b.into_iter().flatten().collect();
        self.drift_bound = self.drift.iter().fold(0.0, |m, x| m.max(x.abs()));
        Ok(self)
    }

    pub fn with_reaction(mut self, reaction: ReactionSpec) -> Result<Self> {
        if let Some(k) = reaction.species() {
            if k != self.n {
                return Err(Error::invalid(format!(
                    "reaction parameters are for {k} species, model has {}",
                    self.n
                )));
            }
        }
        self.reaction = reaction;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn a0(&self) -> &[f64] {
        &self.a0
    }
    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }
    pub fn a_rows(&self) -> Vec<Vec<f64>> {
        self.a.chunks(self.n).map(<[f64]>::to_vec).collect()
    }
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }
    /// Drift vector of species `i`.
    pub fn drift(&self, i: usize) -> &[f64] {
        &self.drift[i * self.d..(i + 1) * self.d]
    }
    pub fn drift_rows(&self) -> Vec<Vec<f64>> {
        self.drift.chunks(self.d).map(<[f64]>::to_vec).collect()
    }
    /// Recorded `||b||_inf`.
    pub fn drift_bound(&self) -> f64 {
        self.drift_bound
    }
    pub fn reaction(&self) -> &ReactionSpec {
        &self.reaction
    }

    /// `a_i0 + sum_k a_ik u_k`.
    #[inline]
    pub fn self_rate(&self, i: usize, u: &[f64]) -> f64 {
        let row = &self.a[i * self.n..(i + 1) * self.n];
        self.a0[i] + row.iter().zip(u).map(|(a, x)| a * x).sum::<f64>()
    }

    /// Entry `A_ij(u)` without input checks.
    #[inline]
    pub fn diffusion_entry(&self, u: &[f64], i: usize, j: usize) -> f64 {
        let diag = if i == j { self.self_rate(i, u) } else { 0.0 };
        diag + self.a(i, j) * u[i]
    }
}

fn check_density(u: &[f64], n: usize, strict: bool) -> Result<()> {
    if u.len() != n {
        return Err(Error::invalid(format!(
            "expected {n} densities, got {}",
            u.len()
        )));
    }
    for (i, &x) in u.iter().enumerate() {
        let ok = x.is_finite() && if strict { x > 0.0 } else { x >= 0.0 };
        if !ok {
            return Err(Error::invalid(format!(
                "density u[{i}] = {x} is not admissible"
            )));
        }
    }
    Ok(())
}

/// `A_ij(u) = delta_ij (a_i0 + sum_k a_ik u_k) + a_ij u_i`, row-major rows.
pub fn diffusion_matrix(spec: &ModelSpec, u: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_density(u, spec.n, false)?;
    Ok((0..spec.n)
        .map(|i| (0..spec.n).map(|j| spec.diffusion_entry(u, i, j)).collect())
        .collect())
}

/// Quadratic form `z : A(u) h''(u)^{-1} z = sum_ij A_ij(u) u_j / pi_j z_i z_j`
/// and its lower bound `alpha0 sum u_i z_i^2 + 2 eta0 sum u_i^2 z_i^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobilityForm {
    pub q: f64,
    pub bound: f64,
}

pub fn entropy_mobility_form(spec: &ModelSpec, u: &[f64], z: &[f64]) -> Result<MobilityForm> {
    check_density(u, spec.n, true)?;
    if z.len() != spec.n || z.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("z must be a finite n-vector"));
    }
    let c = structural_constants(spec)?;
    Ok(mobility_form_with(spec, &c, u, z))
}

pub(crate) fn mobility_form_with(
    spec: &ModelSpec,
    c: &StructuralConstants,
    u: &[f64],
    z: &[f64],
) -> MobilityForm {
    let n = spec.n;
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += spec.diffusion_entry(u, i, j) * u[j] / spec.pi[j] * z[i] * z[j];
        }
    }
    let lin: f64 = (0..n).map(|i| u[i] * z[i] * z[i]).sum();
    let quad: f64 = (0..n).map(|i| (u[i] * z[i]).powi(2)).sum();
    MobilityForm {
        q,
        bound: c.alpha0 * lin + 2.0 * c.eta0 * quad,
    }
}

/// `eta = min_i ( a_ii - 1/4 sum_j (sqrt a_ij - sqrt a_ji)^2 )`.
pub fn weak_cross_diffusion_eta(spec: &ModelSpec) -> f64 {
    (0..spec.n)
        .map(|i| {
            let asym: f64 = (0..spec.n)
                .map(|j| (spec.a(i, j).sqrt() - spec.a(j, i).sqrt()).powi(2))
                .sum();
            spec.a(i, i) - 0.25 * asym
        })
        .fold(f64::INFINITY, f64::min)
}

/// `max_{i != j} |pi_i a_ij - pi_j a_ji|`; zero for a single species.
pub fn detailed_balance_residual(spec: &ModelSpec) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..spec.n {
        for j in 0..spec.n {
            if i != j {
                worst = worst.max((spec.pi[i] * spec.a(i, j) - spec.pi[j] * spec.a(j, i)).abs());
            }
        }
    }
    worst
}

fn detailed_balance_scale(spec: &ModelSpec) -> f64 {
    let mut scale = 0.0f64;
    for i in 0..spec.n {
        for j in 0..spec.n {
            scale = scale.max(spec.pi[i] * spec.a(i, j));
        }
    }
    scale
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum H4Branch {
    WeakCrossDiffusion,
    DetailedBalance,
}

impl H4Branch {
    pub fn name(self) -> &'static str {
        match self {
            H4Branch::WeakCrossDiffusion => "weak-cross-diffusion",
            H4Branch::DetailedBalance => "detailed-balance",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructuralConstants {
    pub alpha0: f64,
    pub eta0: f64,
    pub branch: H4Branch,
}

/// Why each branch of the diffusion hypothesis holds or not.
#[derive(Clone, Debug, PartialEq)]
pub struct H4Assessment {
    pub positive_rates: Result<(), String>,
    pub weak_cross_diffusion: Result<(), String>,
    pub detailed_balance: Result<(), String>,
    pub eta: f64,
    pub detailed_balance_residual: f64,
}

impl H4Assessment {
    /// Detailed balance wins when both branches are admissible.
    pub fn branch(&self) -> Option<H4Branch> {
        self.positive_rates.as_ref().ok()?;
        if self.detailed_balance.is_ok() {
            Some(H4Branch::DetailedBalance)
        } else if self.weak_cross_diffusion.is_ok() {
            Some(H4Branch::WeakCrossDiffusion)
        } else {
            None
        }
    }

    fn failure_text(&self) -> String {
        let mut parts = Vec::new();
        if let Err(e) = &self.positive_rates {
            parts.push(e.clone());
        }
        if let Err(e) = &self.weak_cross_diffusion {
            parts.push(format!("weak cross-diffusion: {e}"));
        }
        if let Err(e) = &self.detailed_balance {
            parts.push(format!("detailed balance: {e}"));
        }
        parts.join("; ")
    }
}

pub fn assess_h4(spec: &ModelSpec) -> H4Assessment {
    let bad: Vec<String> = (0..spec.n)
        .flat_map(|i| {
            let mut v = Vec::new();
            if !(spec.a0[i] > 0.0) {
                v.push(format!("a_{}0 = {} is not positive", i + 1, spec.a0[i]));
            }
            if !(spec.a(i, i) > 0.0) {
                v.push(format!(
                    "a_{0}{0} = {1} is not positive",
                    i + 1,
                    spec.a(i, i)
                ));
            }
            v
        })
        .collect();
    let positive_rates = if bad.is_empty() {
        Ok(())
    } else {
        Err(bad.join(", "))
    };

    let eta = weak_cross_diffusion_eta(spec);
    let weak_cross_diffusion = if !(eta > 0.0) {
        Err(format!("eta = {eta} is not positive"))
    } else if spec.pi.iter().any(|&p| p != 1.0) {
        Err("requires pi_i = 1 for all species".to_string())
    } else {
        Ok(())
    };

    let residual = detailed_balance_residual(spec);
    let detailed_balance = if residual <= DETAILED_BALANCE_RTOL * detailed_balance_scale(spec) {
        Ok(())
    } else {
        Err(format!("max |pi_i a_ij - pi_j a_ji| = {residual}"))
    };

    H4Assessment {
        positive_rates,
        weak_cross_diffusion,
        detailed_balance,
        eta,
        detailed_balance_residual: residual,
    }
}

/// `alpha0 = min_i a_i0 / pi_i`; `eta0 = eta` on the weak-cross-diffusion
/// branch and `min_i a_ii / pi_i` on the detailed-balance branch.
pub fn structural_constants(spec: &ModelSpec) -> Result<StructuralConstants> {
    let h4 = assess_h4(spec);
    let branch = h4
        .branch()
        .ok_or_else(|| Error::Hypothesis(format!("(H4) fails: {}", h4.failure_text())))?;
    let alpha0 = (0..spec.n)
        .map(|i| spec.a0[i] / spec.pi[i])
        .fold(f64::INFINITY, f64::min);
    let eta0 = match branch {
        H4Branch::WeakCrossDiffusion => h4.eta,
        H4Branch::DetailedBalance => (0..spec.n)
            .map(|i| spec.a(i, i) / spec.pi[i])
            .fold(f64::INFINITY, f64::min),
    };
    Ok(StructuralConstants {
        alpha0,
        eta0,
        branch,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum CheckStatus {
    Pass,
    Fail(String),
    PassBySampling { samples: usize, worst: f64 },
    FailBySampling { samples: usize, worst: f64 },
    NotEvaluated,
}

impl CheckStatus {
    pub fn passed(&self) -> bool {
        matches!(self, CheckStatus::Pass | CheckStatus::PassBySampling { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail(_) => "fail",
            CheckStatus::PassBySampling { .. } => "pass-by-sampling",
            CheckStatus::FailBySampling { .. } => "fail-by-sampling",
            CheckStatus::NotEvaluated => "not-evaluated",
        }
    }

    fn samples(&self) -> Option<(usize, f64)> {
        match self {
            CheckStatus::PassBySampling { samples, worst }
            | CheckStatus::FailBySampling { samples, worst } => Some((*samples, *worst)),
            _ => None,
        }
    }
}

/// Aggregated outcome of all hypotheses for one spec.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisReport {
    pub h1: CheckStatus,
    pub drift_bound: f64,
    pub h2_lipschitz: CheckStatus,
    pub lipschitz_constant: f64,
    pub h2_dissipation: CheckStatus,
    pub dissipation: DissipationCheck,
    pub h2_mass: MassGrowthCheck,
    pub h3: CheckStatus,
    pub h4: CheckStatus,
    pub branch: Option<H4Branch>,
    pub eta: f64,
    pub detailed_balance_residual: f64,
    pub alpha0: Option<f64>,
    pub eta0: Option<f64>,
    pub warnings: Vec<String>,
    pub seed: u64,
    pub samples: usize,
}

impl HypothesisReport {
    /// (H1), (H2.i), (H2.ii), (H3) when evaluated, (H4), and either (H2.iii)
    /// or its growth alternative.
    pub fn required_pass(&self) -> bool {
        self.h1.passed()
            && self.h2_lipschitz.passed()
            && self.h2_dissipation.passed()
            && !matches!(self.h3, CheckStatus::Fail(_))
            && self.h4.passed()
            && self.h2_mass.accepted()
    }

    /// Requirements for running a weak-strong probe; (H2.iii) is only recorded.
    pub fn probe_requirements_pass(&self) -> bool {
        self.h1.passed()
            && self.h2_lipschitz.passed()
            && self.h2_dissipation.passed()
            && !matches!(self.h3, CheckStatus::Fail(_))
            && self.h4.passed()
    }

    /// Fills in (H3) from the initial data: every density strictly positive.
    pub fn record_initial_data(&mut self, min_density: f64) {
        self.h3 = if min_density > 0.0 && min_density.is_finite() {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail(format!("inf u0 = {min_density} is not positive"))
        };
    }

    fn mass_row(&self) -> (String, String) {
        match &self.h2_mass.status {
            MassGrowthStatus::Holds { m0 } => ("pass-by-sampling".into(), format!("M0 = {m0}")),
            MassGrowthStatus::GrowthAlternative {
                p,
                constant,
                exponent,
            } => (
                "fail-with-alternative".into(),
                format!("growth alternative holds: p = {p}, C = {constant:.6e}, observed exponent = {exponent:.4}"),
            ),
            MassGrowthStatus::Fail { p, exponent } => (
                "fail".into(),
                format!("no M0 found and observed exponent {exponent:.4} exceeds p = {p}"),
            ),
        }
    }

    fn rows(&self) -> Vec<(String, String, String)> {
        let detail = |s: &CheckStatus| match s {
            CheckStatus::Fail(msg) => msg.clone(),
            _ => String::new(),
        };
        let mut rows = vec![
            (
                "H1".to_string(),
                self.h1.label().to_string(),
                format!("||b||_inf = {}", self.drift_bound),
            ),
            (
                "H2.i".into(),
                self.h2_lipschitz.label().into(),
                format!(
                    "empirical Lipschitz constant = {:.6e}",
                    self.lipschitz_constant
                ),
            ),
            (
                "H2.ii".into(),
                self.h2_dissipation.label().into(),
                format!(
                    "max sum pi_i f_i (log u_i + lambda_i) = {:.6e} at {:?}",
                    self.dissipation.worst_value, self.dissipation.worst_point
                ),
            ),
        ];
        let (mass_status, mass_detail) = self.mass_row();
        rows.push(("H2.iii".into(), mass_status, mass_detail));
        rows.push(("H3".into(), self.h3.label().into(), detail(&self.h3)));
        let h4_detail = match (&self.h4, self.branch) {
            (CheckStatus::Fail(msg), _) => msg.clone(),
            (_, Some(b)) => format!(
                "branch = {}, eta = {}, alpha0 = {}, eta0 = {}",
                b.name(),
                self.eta,
                self.alpha0.unwrap_or(f64::NAN),
                self.eta0.unwrap_or(f64::NAN)
            ),
            _ => String::new(),
        };
        rows.push(("H4".into(), self.h4.label().into(), h4_detail));
        rows
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "hypothesis report (seed = {}, samples = {})",
            self.seed, self.samples
        );
        for (name, status, detail) in self.rows() {
            let _ = writeln!(out, "  {name:<7} {status:<22} {detail}");
        }
        for w in &self.warnings {
            let _ = writeln!(out, "  warning: {w}");
        }
        let _ = writeln!(
            out,
            "  required hypotheses: {}",
            if self.required_pass() {
                "satisfied"
            } else {
                "NOT satisfied"
            }
        );
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("hypothesis,status,samples,worst,detail\n");
        let statuses = [
            &self.h1,
            &self.h2_lipschitz,
            &self.h2_dissipation,
            &CheckStatus::NotEvaluated,
            &self.h3,
            &self.h4,
        ];
        for ((name, status, detail), cs) in self.rows().into_iter().zip(statuses) {
            let (samples, worst) = match cs.samples() {
                Some((s, w)) => (s.to_string(), format!("{w:.16e}")),
                None if name == "H2.iii" => (self.h2_mass.samples.to_string(), String::new()),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(
                out,
                "{name},{status},{samples},{worst},\"{}\"",
                detail.replace('"', "'")
            );
        }
        out
    }
}

/// Runs every hypothesis check. Failures are report entries, not errors.
pub fn validate_hypotheses(spec: &ModelSpec, sampling: &Sampling) -> Result<HypothesisReport> {
    sampling.validate()?;
    let n = spec.n;
    let h1 = if spec.drift.iter().all(|x| x.is_finite()) {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail("drift is not bounded".into())
    };

    let lipschitz_constant = reactions::lipschitz_estimate(&spec.reaction, n, sampling);
    let h2_lipschitz = if lipschitz_constant.is_finite() {
        CheckStatus::PassBySampling {
            samples: sampling.count,
            worst: lipschitz_constant,
        }
    } else {
        CheckStatus::FailBySampling {
            samples: sampling.count,
            worst: lipschitz_constant,
        }
    };

    let dissipation = reactions::entropy_dissipation_check(spec, sampling);
    let h2_dissipation = if dissipation.passed {
        CheckStatus::PassBySampling {
            samples: dissipation.samples,
            worst: dissipation.worst_value,
        }
    } else {
        CheckStatus::FailBySampling {
            samples: dissipation.samples,
            worst: dissipation.worst_value,
        }
    };
    let h2_mass = reactions::mass_growth_check(&spec.reaction, n, spec.d, sampling);

    let h4a = assess_h4(spec);
    let constants = structural_constants(spec).ok();
    let h4 = match &constants {
        Some(_) => CheckStatus::Pass,
        None => CheckStatus::Fail(format!("(H4) fails: {}", h4a.failure_text())),
    };

    let mut warnings = Vec::new();
    if spec.lambda.iter().any(|&l| l <= 0.0) {
        warnings.push(format!(
            "lambda = {:?} has nonpositive entries; the dissipation hypothesis is stated for lambda_i > 0",
            spec.lambda
        ));
    }
    if matches!(spec.reaction, ReactionSpec::UserTable { .. }) {
        warnings.push("user reaction: all reaction checks are sampling-based only".into());
    }

    Ok(HypothesisReport {
        h1,
        drift_bound: spec.drift_bound,
        h2_lipschitz,
        lipschitz_constant,
        h2_dissipation,
        dissipation,
        h2_mass,
        h3: CheckStatus::NotEvaluated,
        h4,
        branch: constants.map(|c| c.branch),
        eta: h4a.eta,
        detailed_balance_residual: h4a.detailed_balance_residual,
        alpha0: constants.map(|c| c.alpha0),
        eta0: constants.map(|c| c.eta0),
        warnings,
        seed: sampling.seed,
        samples: sampling.count,
    })
}
