//! Implicit Euler steps solved by damped Newton in `w = log u`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::solver::banded::BandMatrix;
use crate::solver::field::Field;
use crate::solver::fv::{bandwidth, sample_forcing, Assembler, Forcing};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    /// Bound on `dt ||R||_inf / max(1, ||u_old||_inf)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Step-size halvings allowed before giving up.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 25,
            max_halvings: 10,
        }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::invalid(
                "newton tolerance must be positive and max_iter at least 1",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMeta {
    /// Step size actually taken.
    pub dt: f64,
    pub iterations: usize,
    /// Final scaled residual norm.
    pub residual: f64,
    pub halvings: usize,
}

enum Attempt {
    Converged(Vec<f64>, usize, f64),
    Failed(f64, &'static str),
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn newton_solve(
    spec: &ModelSpec,
    u_old: &Field,
    dt: f64,
    g: &[f64],
    opts: &NewtonOptions,
) -> Attempt {
    let grid = u_old.grid();
    let n = spec.n();
    let m = u_old.data().len();
    let kb = bandwidth(grid, n);
    let scale = dt / inf_norm(u_old.data()).max(1.0);
    let mut asm = Assembler::new(spec, grid);
    let mut w: Vec<f64> = u_old.data().iter().map(|x| x.ln()).collect();
    let mut res = vec![0.0; m];
    let mut trial_res = vec![0.0; m];
    let mut jac = BandMatrix::zeros(m, kb, kb);

    asm.assemble(&w, u_old.data(), dt, g, &mut res, Some(&mut jac));
    let mut norm = scale * inf_norm(&res);
    let mut iters = 0;
    let mut trial = vec![0.0; m];
    loop {
        if !norm.is_finite() {
            return Attempt::Failed(norm, "residual is not finite");
        }
        let converged = norm <= opts.tol;
        if converged && norm == 0.0 {
            return Attempt::Converged(w, iters, norm);
        }
        if !converged && iters >= opts.max_iter {
            return Attempt::Failed(norm, "newton iteration limit reached");
        }
        let lu = match std::mem::replace(&mut jac, BandMatrix::zeros(0, 0, 0)).factorize() {
            Some(lu) => lu,
            None if converged => return Attempt::Converged(w, iters, norm),
            None => return Attempt::Failed(norm, "singular newton matrix"),
        };
        let mut delta: Vec<f64> = res.iter().map(|r| -r).collect();
        lu.solve_in_place(&mut delta);
        if converged {
            // one undamped polishing step takes the residual to rounding
            // level, which keeps the discrete mass balance exact
            for k in 0..m {
                trial[k] = w[k] + delta[k];
            }
            if trial.iter().all(|x| x.is_finite()) {
                asm.assemble(&trial, u_old.data(), dt, g, &mut trial_res, None);
                let tn = scale * inf_norm(&trial_res);
                if tn.is_finite() && tn <= norm.max(opts.tol) {
                    return Attempt::Converged(trial, iters + 1, tn);
                }
            }
            return Attempt::Converged(w, iters, norm);
        }
        if delta.iter().any(|d| !d.is_finite()) {
            return Attempt::Failed(norm, "newton direction is not finite");
        }
        // Armijo backtracking on the scaled max-norm
        let mut lambda = 1.0;
        let accepted = loop {
            for k in 0..m {
                trial[k] = w[k] + lambda * delta[k];
            }
            if trial.iter().all(|x| x.is_finite() && *x < 700.0) {
                asm.assemble(&trial, u_old.data(), dt, g, &mut trial_res, None);
                let tn = scale * inf_norm(&trial_res);
                if tn.is_finite() && tn <= (1.0 - 1e-4 * lambda) * norm {
                    break true;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-4 {
                break false;
            }
        };
        if !accepted {
            return Attempt::Failed(norm, "line search stagnated");
        }
        std::mem::swap(&mut w, &mut trial);
        jac = BandMatrix::zeros(m, kb, kb);
        asm.assemble(&w, u_old.data(), dt, g, &mut res, Some(&mut jac));
        norm = scale * inf_norm(&res);
        iters += 1;
    }
}

/// One implicit Euler step from `t_old`. Halves the step on Newton failure;
/// the step actually taken is in the returned metadata.
pub fn step_implicit(
    spec: &ModelSpec,
    u_old: &Field,
    t_old: f64,
    dt: f64,
    opts: &NewtonOptions,
    forcing: Option<&dyn Forcing>,
) -> Result<(Field, StepMeta)> {
    opts.validate()?;
    if u_old.n() != spec.n() || u_old.grid().dim() != spec.d() {
        return Err(Error::invalid(
            "field does not match the model's species count or dimension",
        ));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step {dt} must be positive")));
    }
    if u_old.min() <= 0.0 {
        return Err(Error::invalid(
            "implicit step needs a strictly positive state",
        ));
    }
    let mut h = dt;
    let mut last = f64::NAN;
    let mut reason = "";
    for halvings in 0..=opts.max_halvings {
        let g = sample_forcing(forcing, u_old.grid(), spec.n(), t_old + h);
        match newton_solve(spec, u_old, h, &g, opts) {
            Attempt::Converged(w, iterations, residual) => {
                let data = w.iter().map(|x| x.exp()).collect();
                let u = Field::from_raw(u_old.grid().clone(), spec.n(), data);
                return Ok((
                    u,
                    StepMeta {
                        dt: h,
                        iterations,
                        residual,
                        halvings,
                    },
                ));
            }
            Attempt::Failed(r, why) => {
                last = r;
                reason = why;
            }
        }
        h *= 0.5;
    }
    Err(Error::Solver {
        t: t_old,
        reason: reason.to_string(),
        residual: last,
        dt_min: 2.0 * h,
    })
}

/// Accepted states of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Field>,
    /// `meta[k]` describes the step that produced `states[k + 1]`.
    meta: Vec<StepMeta>,
}

impl Trajectory {
    pub fn new(u0: Field, t0: f64) -> Self {
        Trajectory {
            times: vec![t0],
            states: vec![u0],
            meta: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, u: Field, meta: StepMeta) -> Result<()> {
        let last = *self.times.last().expect("trajectory is never empty");
        if !(t > last) {
            return Err(Error::invalid(format!(
                "snapshot time {t} does not exceed {last}"
            )));
        }
        self.states[0].same_layout(&u)?;
        self.times.push(t);
        self.states.push(u);
        self.meta.push(meta);
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn states(&self) -> &[Field] {
        &self.states
    }
    pub fn meta(&self) -> &[StepMeta] {
        &self.meta
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn first(&self) -> &Field {
        &self.states[0]
    }
    pub fn last(&self) -> &Field {
        self.states.last().expect("trajectory is never empty")
    }
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    /// Piecewise-linear interpolation in time, clamped to the recorded range.
    pub fn at(&self, t: f64) -> Field {
        let ts = &self.times;
        if t <= ts[0] {
            return self.states[0].clone();
        }
        if t >= self.final_time() {
            return self.last().clone();
        }
        let k = ts.partition_point(|&s| s <= t) - 1;
        let th = (t - ts[k]) / (ts[k + 1] - ts[k]);
        if th == 0.0 {
            return self.states[k].clone();
        }
        let (a, b) = (self.states[k].data(), self.states[k + 1].data());
        let data = a
            .iter()
            .zip(b)
            .map(|(x, y)| (1.0 - th) * x + th * y)
            .collect();
        Field::from_raw(self.states[0].grid().clone(), self.states[0].n(), data)
    }

    /// CSV `t,cell,x[,y],u_1..u_n`, keeping every `cadence`-th snapshot and
    /// the last one.
    pub fn to_csv(&self, cadence: usize) -> String {
        let cadence = cadence.max(1);
        let g = self.states[0].grid();
        let n = self.states[0].n();
        let mut out = String::from("t,cell");
        for name in ["x", "y"].iter().take(g.dim()) {
            out.push(',');
            out.push_str(name);
        }
        for i in 1..=n {
            let _ = write!(out, ",u_{i}");
        }
        out.push('\n');
        let last = self.len() - 1;
        for (k, (t, u)) in self.times.iter().zip(&self.states).enumerate() {
            if k % cadence != 0 && k != last {
                continue;
            }
            for c in 0..g.num_cells() {
                let _ = write!(out, "{t:.16e},{c}");
                for x in g.center(c) {
                    let _ = write!(out, ",{x:.16e}");
                }
                for v in u.cell(c) {
                    let _ = write!(out, ",{v:.16e}");
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Runs implicit Euler from `t0` to `t0 + horizon` with nominal step `dt`.
/// On failure the accepted part is returned inside [`Error::Simulation`].
pub fn simulate(
    spec: &ModelSpec,
    u0: &Field,
    t0: f64,
    horizon: f64,
    dt: f64,
    opts: &NewtonOptions,
    forcing: Option<&dyn Forcing>,
) -> Result<Trajectory> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!(
            "horizon {horizon} must be nonnegative"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step {dt} must be positive")));
    }
    if u0.n() != spec.n() || u0.grid().dim() != spec.d() {
        return Err(Error::invalid("initial field does not match the model"));
    }
    if u0.min() <= 0.0 {
        return Err(Error::Hypothesis(
            "initial data must be strictly positive".into(),
        ));
    }
    let mut traj = Trajectory::new(u0.clone(), t0);
    let end = t0 + horizon;
    let mut k = 0usize;
    let mut t = t0;
    // steps land on t0 + k dt; the last one is shortened to hit `end`
    while end - t > 1e-12 * dt.max(end.abs()) {
        let target = (t0 + (k + 1) as f64 * dt).min(end);
        let h = target - t;
        match step_implicit(spec, traj.last(), t, h, opts, forcing) {
            Ok((u, meta)) => {
                let t_new = if meta.halvings == 0 {
                    target
                } else {
                    t + meta.dt
                };
                traj.push(t_new, u, meta)?;
                t = t_new;
                if meta.halvings == 0 {
                    k += 1;
                }
            }
            Err(e) => {
                return Err(Error::Simulation {
                    source: Box::new(e),
                    partial: Box::new(traj),
                });
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::total_entropy;
    use crate::reactions::ReactionSpec;
    use crate::solver::Grid;

    fn spec2() -> ModelSpec {
        ModelSpec::new(1, vec![1.0, 1.0], vec![vec![0.5, 1.0], vec![1.0, 0.5]]).unwrap()
    }

    fn bumpy(g: &Grid) -> Field {
        Field::from_fn(g.clone(), 2, |x, o| {
            o[0] = 1.0 + 0.5 * (3.0 * x[0]).cos();
            o[1] = 2.0 + 0.8 * (5.0 * x[0]).sin();
        })
        .unwrap()
    }

    #[test]
    fn constant_state_is_fixed() {
        let g = Grid::line(1.0, 10).unwrap();
        let u = Field::constant(g, &[1.0, 3.0]).unwrap();
        let (v, meta) =
            step_implicit(&spec2(), &u, 0.0, 0.1, &NewtonOptions::default(), None).unwrap();
        assert!(meta.iterations <= 1);
        for (a, b) in u.data().iter().zip(v.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn relaxation_equilibrium_is_fixed() {
        let lambda = vec![0.3, -0.2];
        let spec = spec2()
            .with_weights(vec![1.0, 1.0], lambda.clone())
            .unwrap()
            .with_reaction(ReactionSpec::linear_relaxation(&lambda))
            .unwrap();
        let eq: Vec<f64> = lambda.iter().map(|l| (-l).exp()).collect();
        let u = Field::constant(Grid::line(1.0, 8).unwrap(), &eq).unwrap();
        let (v, _) = step_implicit(&spec, &u, 0.0, 0.2, &NewtonOptions::default(), None).unwrap();
        for (a, b) in u.data().iter().zip(v.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn mass_entropy_and_positivity() {
        let g = Grid::line(1.0, 32).unwrap();
        let spec = spec2();
        let u0 = bumpy(&g);
        let traj = simulate(&spec, &u0, 0.0, 0.2, 0.01, &NewtonOptions::default(), None).unwrap();
        assert!((traj.final_time() - 0.2).abs() < 1e-15);
        let m0 = u0.masses();
        let mut h_prev = total_entropy(&spec, &u0).unwrap();
        for u in traj.states() {
            assert!(u.min() > 0.0);
            for (a, b) in u.masses().iter().zip(&m0) {
                assert!((a - b).abs() <= 1e-12 * b, "{a} {b}");
            }
            let h = total_entropy(&spec, u).unwrap();
            assert!(h <= h_prev + 1e-12);
            h_prev = h;
        }
    }

    #[test]
    fn deterministic_and_zero_horizon() {
        let g = Grid::line(1.0, 16).unwrap();
        let u0 = bumpy(&g);
        let opts = NewtonOptions::default();
        let a = simulate(&spec2(), &u0, 0.0, 0.1, 0.02, &opts, None).unwrap();
        let b = simulate(&spec2(), &u0, 0.0, 0.1, 0.02, &opts, None).unwrap();
        assert_eq!(a, b);
        let z = simulate(&spec2(), &u0, 0.0, 0.0, 0.02, &opts, None).unwrap();
        assert_eq!(z.len(), 1);
    }

    #[test]
    fn interpolation_in_time() {
        let g = Grid::line(1.0, 4).unwrap();
        let mut tr = Trajectory::new(Field::constant(g.clone(), &[1.0]).unwrap(), 0.0);
        let meta = StepMeta {
            dt: 1.0,
            iterations: 1,
            residual: 0.0,
            halvings: 0,
        };
        tr.push(1.0, Field::constant(g.clone(), &[3.0]).unwrap(), meta)
            .unwrap();
        assert_eq!(tr.at(0.25).data()[0], 1.5);
        assert_eq!(tr.at(5.0).data()[0], 3.0);
        assert!(tr
            .push(1.0, Field::constant(g, &[3.0]).unwrap(), meta)
            .is_err());
        let csv = tr.to_csv(1);
        assert!(csv.starts_with("t,cell,x,u_1\n"));
        assert_eq!(csv.lines().count(), 9);
    }
}
