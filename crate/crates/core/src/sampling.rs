//! Seeded sampling of density vectors for the sampling-based hypothesis checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Sampling plan shared by the hypothesis checks.
///
/// Densities are drawn log-uniformly per component over `[lo, hi]`, which
/// spreads samples evenly across scales.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampling {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
    /// Edge length `R` of the box `[0, R]^n` used by the Lipschitz estimate.
    pub box_radius: f64,
    /// Largest candidate `M0` tried by the mass-growth check.
    pub m0_search_max: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            count: 20_000,
            lo: 1e-4,
            hi: 1e4,
            seed: 0x5eed,
            box_radius: 10.0,
            m0_search_max: 1000,
        }
    }
}

impl Sampling {
    pub fn new(count: usize, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        let s = Sampling {
            count,
            lo,
            hi,
            seed,
            ..Sampling::default()
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("sampling count must be at least 1"));
        }
        if !(self.lo > 0.0 && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::invalid(format!(
                "sampling range [{}, {}] must lie inside (0, inf)",
                self.lo, self.hi
            )));
        }
        if !(self.box_radius > 0.0 && self.box_radius.is_finite()) {
            return Err(Error::invalid("box radius must be positive"));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// All sample points, each of length `n`.
    pub fn points(&self, n: usize) -> Vec<Vec<f64>> {
        let mut rng = self.rng();
        (0..self.count)
            .map(|_| {
                (0..n)
                    .map(|_| log_uniform(&mut rng, self.lo, self.hi))
                    .collect()
            })
            .collect()
    }
}

pub fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    let (a, b) = (lo.ln(), hi.ln());
    rng.gen_range(a..=b).exp()
}
