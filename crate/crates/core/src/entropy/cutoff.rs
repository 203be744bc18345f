//! The double-logarithmic cutoff
//! `phi_K^L(u) = phi( (log log(sum u + e) - log log(L + e)) / log(K + 1) )`
//! and its derivatives.

use std::f64::consts::E;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Smooth nonincreasing base profile with `phi = 1` on `(-inf, 0]` and
/// `phi = 0` on `[1, inf)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CutoffProfile {
    /// `phi(x) = N(1-x) / (N(1-x) + N(x))` with `N(x) = exp(-1/x)`; C-infinity.
    #[default]
    Bump,
    /// `phi(x) = 1 - (10x^3 - 15x^4 + 6x^5)`; C^2, cheaper.
    Smoothstep,
}

impl CutoffProfile {
    pub fn name(self) -> &'static str {
        match self {
            CutoffProfile::Bump => "bump",
            CutoffProfile::Smoothstep => "smoothstep",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "bump" => Some(CutoffProfile::Bump),
            "smoothstep" => Some(CutoffProfile::Smoothstep),
            _ => None,
        }
    }

    /// `(phi, phi', phi'')` at `x`.
    pub fn eval(self, x: f64) -> (f64, f64, f64) {
        if x <= 0.0 {
            return (1.0, 0.0, 0.0);
        }
        if x >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        match self {
            CutoffProfile::Smoothstep => {
                let y = 1.0 - x;
                let s = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
                (
                    1.0 - s,
                    -30.0 * x * x * y * y,
                    -60.0 * x * y * (1.0 - 2.0 * x),
                )
            }
            CutoffProfile::Bump => {
                // phi = sigma(-r) with r = 1/(1-x) - 1/x
                let r = 1.0 / (1.0 - x) - 1.0 / x;
                let (p, q) = if r >= 0.0 {
                    let t = (-r).exp();
                    (t / (1.0 + t), 1.0 / (1.0 + t))
                } else {
                    let t = r.exp();
                    (1.0 / (1.0 + t), t / (1.0 + t))
                };
                let r1 = 1.0 / ((1.0 - x) * (1.0 - x)) + 1.0 / (x * x);
                let r2 = 2.0 / (1.0 - x).powi(3) - 2.0 / (x * x * x);
                let pq = p * q;
                let d1 = -pq * r1;
                let d2 = d1 * (p - q) * r1 - pq * r2;
                (p, d1, d2)
            }
        }
    }

    /// `sup |phi'|`.
    pub fn sup_d1(self) -> f64 {
        match self {
            CutoffProfile::Smoothstep => 1.875,
            CutoffProfile::Bump => bump_sups().0,
        }
    }

    /// `sup |phi''|`.
    pub fn sup_d2(self) -> f64 {
        match self {
            CutoffProfile::Smoothstep => 10.0 / 3f64.sqrt(),
            CutoffProfile::Bump => bump_sups().1,
        }
    }
}

fn bump_sups() -> (f64, f64) {
    static SUPS: OnceLock<(f64, f64)> = OnceLock::new();
    *SUPS.get_or_init(|| {
        let d1 = |x: f64| CutoffProfile::Bump.eval(x).1.abs();
        let d2 = |x: f64| CutoffProfile::Bump.eval(x).2.abs();
        (sup_on_unit(d1), sup_on_unit(d2))
    })
}

/// Maximum of a unimodal-per-bracket function on (0,1): dense scan, then
/// golden-section refinement around the best sample.
fn sup_on_unit(f: impl Fn(f64) -> f64) -> f64 {
    const SAMPLES: usize = 20_000;
    let h = 1.0 / SAMPLES as f64;
    let (mut best_x, mut best) = (0.5, f(0.5));
    for k in 1..SAMPLES {
        let x = k as f64 * h;
        let y = f(x);
        if y > best {
            best = y;
            best_x = x;
        }
    }
    let (mut a, mut b) = ((best_x - h).max(0.0), (best_x + h).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(f(0.5 * (a + b)))
}

/// Regularization parameters: `phi_K^L`, `phi_K^M` and the shift `eps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffSpec {
    pub k: u32,
    pub l: f64,
    pub m: f64,
    pub eps: f64,
    pub profile: CutoffProfile,
}

impl CutoffSpec {
    pub fn new(k: u32, l: f64, m: f64, eps: f64, profile: CutoffProfile) -> Result<Self> {
        let c = CutoffSpec {
            k,
            l,
            m,
            eps,
            profile,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::invalid(format!(
                "cutoff K = {} must be at least 3",
                self.k
            )));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::invalid(format!(
                "cutoff L = {} must be positive",
                self.l
            )));
        }
        if !(self.m > self.l && self.m.is_finite()) {
            return Err(Error::invalid(format!(
                "cutoff M = {} must exceed L = {}",
                self.m, self.l
            )));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::invalid(format!(
                "eps = {} must lie in (0, 1/2)",
                self.eps
            )));
        }
        Ok(())
    }

    pub fn lower(&self) -> Cutoff {
        Cutoff::new(self.k, self.l, self.profile)
    }
    pub fn upper(&self) -> Cutoff {
        Cutoff::new(self.k, self.m, self.profile)
    }
}

/// `phi_K^L` for fixed `K`, `L` and profile. Depends on `u` only through
/// `s = sum_k u_k`, so the gradient has equal components and the Hessian
/// equal entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub k: u32,
    pub level: f64,
    pub profile: CutoffProfile,
    log_k1: f64,
    loglog_level: f64,
    upper_edge: f64,
}

/// Value and the first two derivatives with respect to the total density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffJet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Cutoff {
    pub fn new(k: u32, level: f64, profile: CutoffProfile) -> Self {
        let log_k1 = (k as f64 + 1.0).ln();
        Cutoff {
            k,
            level,
            profile,
            log_k1,
            loglog_level: (level + E).ln().ln(),
            upper_edge: (level + E).powf(k as f64 + 1.0) - E,
        }
    }

    /// Total density beyond which the cutoff vanishes, `(L+e)^(K+1) - e`.
    pub fn upper_edge(&self) -> f64 {
        self.upper_edge
    }

    /// Argument of the base profile at total density `s`.
    pub fn argument(&self, s: f64) -> f64 {
        ((s + E).ln().ln() - self.loglog_level) / self.log_k1
    }

    pub fn jet_of_sum(&self, s: f64) -> CutoffJet {
        if s <= self.level {
            return CutoffJet {
                value: 1.0,
                d1: 0.0,
                d2: 0.0,
            };
        }
        if s >= self.upper_edge {
            return CutoffJet {
                value: 0.0,
                d1: 0.0,
                d2: 0.0,
            };
        }
        let z = self.argument(s);
        let (p, p1, p2) = self.profile.eval(z);
        let se = s + E;
        let ell = se.ln();
        // dz/ds = 1 / (log(K+1) (s+e) log(s+e))
        let dz = 1.0 / (self.log_k1 * se * ell);
        // d2z/ds2 = -dz (log(s+e) + 1) / ((s+e) log(s+e)), no (s+e)^2 overflow
        let d2z = -dz * (ell + 1.0) / (se * ell);
        CutoffJet {
            value: p,
            d1: p1 * dz,
            d2: p2 * dz * dz + p1 * d2z,
        }
    }

    pub fn value_of_sum(&self, s: f64) -> f64 {
        self.jet_of_sum(s).value
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        self.value_of_sum(u.iter().sum())
    }

    pub fn grad(&self, u: &[f64]) -> Vec<f64> {
        vec![self.jet_of_sum(u.iter().sum()).d1; u.len()]
    }

    pub fn hess(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let d2 = self.jet_of_sum(u.iter().sum()).d2;
        vec![vec![d2; u.len()]; u.len()]
    }

    /// Right-hand side of the first-derivative bound, without the constant:
    /// `1 / (log(K+1) (s+e) log(s+e))`.
    pub fn d1_scale(&self, s: f64) -> f64 {
        let se = s + E;
        1.0 / (self.log_k1 * se * se.ln())
    }

    /// `1 / (log(K+1) (s+e)^2 log(s+e))`.
    pub fn d2_scale(&self, s: f64) -> f64 {
        self.d1_scale(s) / (s + E)
    }

    /// Constant in the second-derivative bound: `sup|phi''| + 2 sup|phi'|`
    /// (uses `log(K+1) > 1` and `log(s+e) >= 1`).
    pub fn d2_constant(&self) -> f64 {
        self.profile.sup_d2() + 2.0 * self.profile.sup_d1()
    }
}

/// `phi_K^L(u)`.
pub fn cutoff_value(u: &[f64], k: u32, l: f64, profile: CutoffProfile) -> f64 {
    Cutoff::new(k, l, profile).value(u)
}

pub fn cutoff_grad(u: &[f64], k: u32, l: f64, profile: CutoffProfile) -> Vec<f64> {
    Cutoff::new(k, l, profile).grad(u)
}

pub fn cutoff_hess(u: &[f64], k: u32, l: f64, profile: CutoffProfile) -> Vec<Vec<f64>> {
    Cutoff::new(k, l, profile).hess(u)
}
