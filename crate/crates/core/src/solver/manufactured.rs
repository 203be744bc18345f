//! Strong reference solutions for the weak-strong comparison.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::solver::field::Field;
use crate::solver::fv::Forcing;
use crate::solver::grid::Grid;
use crate::solver::newton::{StepMeta, Trajectory};
use crate::solver::transfer::restrict;

/// `v_i(x, t) = m_i + A_i exp(-t) prod_a cos(pi x_a / L_a)` together with the
/// forcing that makes it an exact solution.
#[derive(Clone, Debug)]
pub struct ManufacturedSolution {
    spec: ModelSpec,
    extents: Vec<f64>,
    mean: Vec<f64>,
    amplitude: Vec<f64>,
}

impl ManufacturedSolution {
    pub fn new(spec: &ModelSpec, extents: &[f64], mean: &[f64], amplitude: &[f64]) -> Result<Self> {
        let n = spec.n();
        if mean.len() != n || amplitude.len() != n {
            return Err(Error::invalid(format!(
                "mean and amplitude need {n} entries"
            )));
        }
        // grad v . nu = 0 leaves the boundary flux -v b . nu, which must vanish
        if spec.drift_bound() != 0.0 {
            return Err(Error::invalid(
                "manufactured solutions satisfy the no-flux condition only without drift",
            ));
        }
        if extents.len() != spec.d() || extents.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::invalid(
                "extents must be positive, one per dimension",
            ));
        }
        for i in 0..n {
            if !(mean[i] - amplitude[i].abs() > 0.0) || !amplitude[i].is_finite() {
                return Err(Error::invalid(format!(
                    "species {}: mean {} must exceed |amplitude| {}",
                    i + 1,
                    mean[i],
                    amplitude[i]
                )));
            }
        }
        Ok(ManufacturedSolution {
            spec: spec.clone(),
            extents: extents.to_vec(),
            mean: mean.to_vec(),
            amplitude: amplitude.to_vec(),
        })
    }

    fn shape(&self, x: &[f64]) -> (f64, [f64; 2], f64) {
        let d = self.extents.len();
        let k: Vec<f64> = self.extents.iter().map(|l| PI / l).collect();
        let cs: Vec<f64> = (0..d).map(|a| (k[a] * x[a]).cos()).collect();
        let sn: Vec<f64> = (0..d).map(|a| (k[a] * x[a]).sin()).collect();
        let c: f64 = cs.iter().product();
        let mut grad = [0.0; 2];
        for a in 0..d {
            let others: f64 = (0..d).filter(|&b| b != a).map(|b| cs[b]).product();
            grad[a] = -k[a] * sn[a] * others;
        }
        let lap = -k.iter().map(|q| q * q).sum::<f64>() * c;
        (c, grad, lap)
    }

    pub fn value(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let (c, _, _) = self.shape(x);
        let e = (-t).exp();
        for i in 0..out.len() {
            out[i] = self.mean[i] + self.amplitude[i] * e * c;
        }
    }

    /// Point values at cell centres.
    pub fn field(&self, grid: &Grid, t: f64) -> Result<Field> {
        Field::from_fn(grid.clone(), self.mean.len(), |x, o| self.value(x, t, o))
    }

    /// Exact solution sampled at cell centres on `t0, t0 + dt, ..., t_end`.
    pub fn trajectory(&self, grid: &Grid, t0: f64, t_end: f64, dt: f64) -> Result<Trajectory> {
        if !(dt > 0.0) || t_end < t0 {
            return Err(Error::invalid(
                "sampling window needs dt > 0 and t_end >= t0",
            ));
        }
        let mut traj = Trajectory::new(self.field(grid, t0)?, t0);
        let steps = ((t_end - t0) / dt - 1e-9).ceil().max(0.0) as usize;
        for k in 1..=steps {
            let t = (t0 + k as f64 * dt).min(t_end);
            let meta = StepMeta {
                dt,
                iterations: 0,
                residual: 0.0,
                halvings: 0,
            };
            traj.push(t, self.field(grid, t)?, meta)?;
        }
        Ok(traj)
    }

    /// `c = min_i (m_i - |A_i|)`.
    pub fn lower_bound(&self) -> f64 {
        self.mean
            .iter()
            .zip(&self.amplitude)
            .map(|(m, a)| m - a.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Bound on `v`, `|d_t v|` and `|grad v|` for `t >= 0`.
    pub fn upper_bound(&self) -> f64 {
        let kmax: f64 = self
            .extents
            .iter()
            .map(|l| PI / l)
            .map(|k| k * k)
            .sum::<f64>()
            .sqrt();
        let mut c: f64 = 0.0;
        for (m, a) in self.mean.iter().zip(&self.amplitude) {
            c = c.max(m + a.abs()).max(a.abs()).max(a.abs() * kmax);
        }
        c
    }
}

impl Forcing for ManufacturedSolution {
    /// `g_i = d_t v_i - Lap p_i(v) + b_i . grad v_i - f_i(v)` with
    /// `p_i(v) = a_i0 v_i + sum_k a_ik v_i v_k`.
    fn eval(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let spec = &self.spec;
        let n = spec.n();
        let d = self.extents.len();
        let (c, gc, lc) = self.shape(x);
        let e = (-t).exp();
        let v: Vec<f64> = (0..n)
            .map(|i| self.mean[i] + self.amplitude[i] * e * c)
            .collect();
        let gv = |i: usize, a: usize| self.amplitude[i] * e * gc[a];
        let lv = |i: usize| self.amplitude[i] * e * lc;
        let mut f = vec![0.0; n];
        spec.reaction().eval_into(&v, &mut f);
        for i in 0..n {
            let mut lap = spec.a0()[i] * lv(i);
            for k in 0..n {
                let dot: f64 = (0..d).map(|a| gv(i, a) * gv(k, a)).sum();
                lap += spec.a(i, k) * (v[i] * lv(k) + 2.0 * dot + v[k] * lv(i));
            }
            let drift: f64 = (0..d).map(|a| spec.drift(i)[a] * gv(i, a)).sum();
            out[i] = -self.amplitude[i] * e * c - lap + drift - f[i];
        }
    }
}

/// Reference `v` used in place of a strong solution.
#[derive(Clone, Debug)]
pub enum StrongProxy {
    /// A run on a grid `refinement` times finer, restricted to the coarse
    /// grid and interpolated linearly in time.
    FineGridRun {
        refinement: usize,
        trajectory: Trajectory,
    },
    Manufactured(ManufacturedSolution),
}

impl StrongProxy {
    /// `v(., t)` on `grid`.
    pub fn at(&self, grid: &Grid, t: f64) -> Result<Field> {
        match self {
            StrongProxy::Manufactured(m) => m.field(grid, t),
            StrongProxy::FineGridRun { trajectory, .. } => restrict(&trajectory.at(t), grid),
        }
    }

    pub fn forcing(&self) -> Option<&dyn Forcing> {
        match self {
            StrongProxy::Manufactured(m) => Some(m),
            StrongProxy::FineGridRun { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StrongProxy::Manufactured(_) => "manufactured",
            StrongProxy::FineGridRun { .. } => "fine_grid",
        }
    }
}

pub fn manufactured_strong(
    spec: &ModelSpec,
    extents: &[f64],
    mean: &[f64],
    amplitude: &[f64],
) -> Result<StrongProxy> {
    Ok(StrongProxy::Manufactured(ManufacturedSolution::new(
        spec, extents, mean, amplitude,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reactions::ReactionSpec;
    use crate::solver::fv::fv_residual;

    fn spec() -> ModelSpec {
        ModelSpec::new(1, vec![1.0, 0.5], vec![vec![0.2, 1.0], vec![0.3, 0.1]])
            .unwrap()
            .with_reaction(
                ReactionSpec::logistic(vec![1.0, 0.5], vec![vec![0.5, 0.2], vec![0.1, 0.4]])
                    .unwrap(),
            )
            .unwrap()
    }

    #[test]
    fn constant_case_forcing_cancels_reaction() {
        let s = spec();
        let m = ManufacturedSolution::new(&s, &[1.0], &[1.0, 2.0], &[0.0, 0.0]).unwrap();
        let mut g = [0.0; 2];
        m.eval(&[0.3], 0.5, &mut g);
        let f = s.reaction().evaluate(&[1.0, 2.0]).unwrap();
        assert_eq!(g, [-f[0], -f[1]]);
        assert_eq!(m.lower_bound(), 1.0);
        assert!(ManufacturedSolution::new(&s, &[1.0], &[1.0, 2.0], &[1.0, 0.0]).is_err());
        let drifted = s.clone().with_drift(vec![vec![0.3], vec![0.0]]).unwrap();
        assert!(ManufacturedSolution::new(&drifted, &[1.0], &[1.0, 2.0], &[0.5, 0.0]).is_err());
    }

    #[test]
    fn forcing_matches_difference_quotients() {
        // independent check: finite differences of the flux potential
        let s = spec();
        let m = ManufacturedSolution::new(&s, &[2.0], &[2.0, 3.0], &[0.5, -1.0]).unwrap();
        let (x, t, h) = (0.7, 0.3, 1e-4);
        let v = |x: f64, t: f64| {
            let mut o = [0.0; 2];
            m.value(&[x], t, &mut o);
            o
        };
        let p = |x: f64, i: usize| {
            let u = v(x, t);
            s.a0()[i] * u[i] + (0..2).map(|k| s.a(i, k) * u[i] * u[k]).sum::<f64>()
        };
        let mut g = [0.0; 2];
        m.eval(&[x], t, &mut g);
        let f = s.reaction().evaluate(&v(x, t)).unwrap();
        for i in 0..2 {
            let dt = (v(x, t + h)[i] - v(x, t - h)[i]) / (2.0 * h);
            let lap = (p(x + h, i) - 2.0 * p(x, i) + p(x - h, i)) / (h * h);
            let dv = (v(x + h, t)[i] - v(x - h, t)[i]) / (2.0 * h);
            let want = dt - lap + s.drift(i)[0] * dv - f[i];
            assert!((g[i] - want).abs() < 1e-5, "{i}: {} {want}", g[i]);
        }
    }

    #[test]
    fn spatial_residual_is_second_order() {
        let s = spec();
        let m = ManufacturedSolution::new(&s, &[1.0], &[2.0, 3.0], &[0.5, -1.0]).unwrap();
        // residual of the exact solution with exact time derivative folded in:
        // use a tiny dt so the time-difference error stays below the space error
        let t = 0.2;
        let dt = 1e-7;
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = Grid::line(1.0, n).unwrap();
            let new = m.field(&g, t).unwrap();
            let old = m.field(&g, t - dt).unwrap();
            let r = fv_residual(&s, &new, &old, dt, Some(&m), t).unwrap();
            let l2 = (r.iter().map(|x| x * x).sum::<f64>() * g.cell_measure()).sqrt();
            errs.push(l2);
        }
        for w in errs.windows(2) {
            assert!(w[0] / w[1] > 3.3, "{errs:?}");
        }
    }
}
