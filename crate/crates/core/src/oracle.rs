//! Brute-force references for tests: finite differences, refined
//! quadrature, random structured coefficient sets and a grid search for the
//! mobility-form minimum. Nothing here calls the formulas it is meant to
//! check.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{H4Branch, ModelSpec};
use crate::solver::Grid;

/// Step rule, quadrature subdivision, generation ranges and seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    /// Step is `rel_step (1 + |u|_inf)`.
    pub rel_step: f64,
    pub subdivision: usize,
    pub ranges: SpecRanges,
    pub seed: u64,
}

impl OracleConfig {
    pub fn new(n: usize) -> Self {
        OracleConfig {
            rel_step: 1e-6,
            subdivision: 4,
            ranges: SpecRanges::new(n),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_step > 0.0 && self.rel_step.is_finite()) {
            return Err(Error::invalid("finite-difference step must be positive"));
        }
        if self.subdivision < 2 {
            return Err(Error::invalid("quadrature subdivision must be at least 2"));
        }
        Ok(())
    }

    pub fn step(&self, u: &[f64]) -> f64 {
        self.rel_step * (1.0 + u.iter().fold(0.0f64, |m, x| m.max(x.abs())))
    }
}

/// Default finite-difference step `1e-6 (1 + |u|_inf)`.
pub fn default_step(u: &[f64]) -> f64 {
    1e-6 * (1.0 + u.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

/// Central-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, u: &[f64], h: f64) -> Vec<f64> {
    let mut x = u.to_vec();
    (0..u.len())
        .map(|j| {
            x[j] = u[j] + h;
            let fp = f(&x);
            x[j] = u[j] - h;
            let fm = f(&x);
            x[j] = u[j];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian from four-point stencils.
pub fn fd_hessian(f: impl Fn(&[f64]) -> f64, u: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = u.len();
    let mut x = u.to_vec();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let mut at = |di: f64, dj: f64| {
                x[i] += di;
                x[j] += dj;
                let v = f(&x);
                x[i] = u[i];
                x[j] = u[j];
                v
            };
            let v = if i == j {
                (at(h, 0.0) - 2.0 * f(u) + at(-h, 0.0)) / (h * h)
            } else {
                (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
            };
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Central-difference Jacobian of a vector map, row-major `d f_i / d x_j`.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x0: &[f64], h: f64) -> Vec<Vec<f64>> {
    let m = x0.len();
    let mut x = x0.to_vec();
    let mut cols = Vec::with_capacity(m);
    for j in 0..m {
        x[j] = x0[j] + h;
        let fp = f(&x);
        x[j] = x0[j] - h;
        let fm = f(&x);
        x[j] = x0[j];
        cols.push(
            fp.iter()
                .zip(&fm)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect::<Vec<f64>>(),
        );
    }
    let rows = cols.first().map_or(0, Vec::len);
    (0..rows)
        .map(|i| (0..m).map(|j| cols[j][i]).collect())
        .collect()
}

/// Midpoint sum of `f` over `grid` with every cell split `subdivision`
/// times per axis.
pub fn dense_integral(f: impl Fn(&[f64]) -> f64, grid: &Grid, subdivision: usize) -> Result<f64> {
    if subdivision < 2 {
        return Err(Error::invalid("subdivision must be at least 2"));
    }
    let fine = grid.refined(subdivision)?;
    let w = fine.cell_measure();
    Ok((0..fine.num_cells())
        .map(|c| f(&fine.center(c)))
        .sum::<f64>()
        * w)
}

/// Sampling ranges for [`random_h4_spec`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpecRanges {
    pub n: usize,
    pub d: usize,
    pub a0: (f64, f64),
    pub a: (f64, f64),
    /// Exponent range for `pi = 2^k`.
    pub pi_log2: (i32, i32),
    /// Rejection budget for the weak-cross-diffusion branch.
    pub attempts: usize,
}

impl SpecRanges {
    pub fn new(n: usize) -> Self {
        SpecRanges {
            n,
            d: 1,
            a0: (0.1, 2.0),
            a: (0.05, 2.0),
            pi_log2: (-3, 3),
            attempts: 10_000,
        }
    }
}

/// Random coefficients satisfying the requested branch of the diffusion
/// hypothesis. Detailed balance uses powers of two for `pi`, so
/// `a_ji = pi_i a_ij / pi_j` is exact and the residual vanishes identically.
pub fn random_h4_spec(ranges: &SpecRanges, branch: H4Branch, seed: u64) -> Result<ModelSpec> {
    let SpecRanges {
        n,
        d,
        a0,
        a,
        pi_log2,
        attempts,
    } = *ranges;
    if n == 0 || !(a0.0 > 0.0 && a0.0 <= a0.1 && a.0 > 0.0 && a.0 <= a.1) || pi_log2.0 > pi_log2.1 {
        return Err(Error::invalid("ranges must be positive and ordered"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |r: (f64, f64), rng: &mut ChaCha8Rng| rng.gen_range(r.0..=r.1);
    match branch {
        H4Branch::DetailedBalance => {
            let pi: Vec<f64> = (0..n)
                .map(|_| 2f64.powi(rng.gen_range(pi_log2.0..=pi_log2.1)))
                .collect();
            let a0v: Vec<f64> = (0..n).map(|_| draw(a0, &mut rng)).collect();
            let mut m = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i..n {
                    m[i][j] = draw(a, &mut rng);
                }
                for j in 0..i {
                    m[i][j] = pi[j] * m[j][i] / pi[i];
                }
            }
            ModelSpec::new(d, a0v, m)?.with_weights(pi, vec![0.0; n])
        }
        H4Branch::WeakCrossDiffusion => {
            for _ in 0..attempts {
                let a0v: Vec<f64> = (0..n).map(|_| draw(a0, &mut rng)).collect();
                let m: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..n).map(|_| draw(a, &mut rng)).collect())
                    .collect();
                // eta = min_i (a_ii - 1/4 sum_j (sqrt a_ij - sqrt a_ji)^2), written out
                let mut eta = f64::INFINITY;
                for i in 0..n {
                    let mut s = 0.0;
                    for j in 0..n {
                        let t = m[i][j].sqrt() - m[j][i].sqrt();
                        s += t * t;
                    }
                    eta = eta.min(m[i][i] - s / 4.0);
                }
                if eta > 0.0 {
                    return ModelSpec::new(d, a0v, m);
                }
            }
            Err(Error::invalid(
                "rejection budget exhausted for the weak-cross-diffusion branch",
            ))
        }
    }
}

/// Points on the unit sphere in `R^n`: both signs for `n = 1`, equally
/// spaced angles for `n = 2`, a Fibonacci lattice for `n = 3` and seeded
/// Gaussian directions for `n = 4`.
pub fn sphere_grid(n: usize, resolution: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let r = resolution.max(1);
    Ok(match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..r)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / r as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..r)
                .map(|k| {
                    let y = 1.0 - 2.0 * (k as f64 + 0.5) / r as f64;
                    let rad = (1.0 - y * y).sqrt();
                    let th = golden * k as f64;
                    vec![rad * th.cos(), y, rad * th.sin()]
                })
                .collect()
        }
        4 => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..r)
                .map(|_| {
                    let z: Vec<f64> = (0..4)
                        .map(|_| {
                            // Box-Muller
                            let (a, b): (f64, f64) = (rng.gen_range(1e-300..1.0), rng.gen());
                            (-2.0 * a.ln()).sqrt() * (2.0 * PI * b).cos()
                        })
                        .collect();
                    let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
                    z.iter().map(|x| x / norm).collect()
                })
                .collect()
        }
        _ => return Err(Error::invalid("sphere grids are provided for n <= 4")),
    })
}

/// `min_z (Q(u, z) - bound(u, z))` over a sphere grid, with `Q` and the bound
/// assembled here from the raw coefficients for the given branch.
pub fn quadratic_form_min(
    spec: &ModelSpec,
    u: &[f64],
    branch: H4Branch,
    resolution: usize,
) -> Result<f64> {
    let n = spec.n();
    if u.len() != n || u.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::invalid("u must be a positive n-vector"));
    }
    let a = spec.a_rows();
    let a0 = spec.a0();
    let pi = spec.pi();
    let alpha0 = (0..n).map(|i| a0[i] / pi[i]).fold(f64::INFINITY, f64::min);
    let eta0 = match branch {
        H4Branch::DetailedBalance => (0..n)
            .map(|i| a[i][i] / pi[i])
            .fold(f64::INFINITY, f64::min),
        H4Branch::WeakCrossDiffusion => (0..n)
            .map(|i| {
                a[i][i]
                    - 0.25
                        * (0..n)
                            .map(|j| (a[i][j].sqrt() - a[j][i].sqrt()).powi(2))
                            .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min),
    };
    // M_ij = A_ij(u) u_j / pi_j with A_ij = delta_ij (a_i0 + sum_k a_ik u_k) + a_ij u_i
    let mut mat = vec![vec![0.0; n]; n];
    for i in 0..n {
        let rate = a0[i] + (0..n).map(|k| a[i][k] * u[k]).sum::<f64>();
        for j in 0..n {
            let aij = if i == j { rate } else { 0.0 } + a[i][j] * u[i];
            mat[i][j] = aij * u[j] / pi[j];
        }
    }
    let mut best = f64::INFINITY;
    for z in sphere_grid(n, resolution, 17)? {
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += mat[i][j] * z[i] * z[j];
            }
        }
        let bound: f64 = (0..n)
            .map(|i| alpha0 * u[i] * z[i] * z[i] + 2.0 * eta0 * (u[i] * z[i]).powi(2))
            .sum();
        best = best.min(q - bound);
    }
    Ok(best)
}
