//! Cell-centred finite volumes in entropy variables `w = log u`.
//!
//! Face flux along `axis` from cell `L` to cell `R`:
//! `F_i = sum_j B_ij(ubar) (w_jR - w_jL) / dx - ubar_i b_i[axis]` with
//! `B_ij(u) = A_ij(u) u_j` and `ubar` the arithmetic face average. Boundary
//! faces carry no flux, so `sum_cells |cell| div_h F = 0` exactly.

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::solver::banded::BandMatrix;
use crate::solver::field::Field;
use crate::solver::grid::Grid;

/// Source term `g(x, t)` added to the right-hand side.
pub trait Forcing: Send + Sync {
    fn eval(&self, x: &[f64], t: f64, out: &mut [f64]);
}

impl<F: Fn(&[f64], f64, &mut [f64]) + Send + Sync> Forcing for F {
    fn eval(&self, x: &[f64], t: f64, out: &mut [f64]) {
        self(x, t, out)
    }
}

/// Forcing sampled at cell centres, cell-major.
pub(crate) fn sample_forcing(
    forcing: Option<&dyn Forcing>,
    grid: &Grid,
    n: usize,
    t: f64,
) -> Vec<f64> {
    let mut g = vec![0.0; n * grid.num_cells()];
    if let Some(f) = forcing {
        for c in 0..grid.num_cells() {
            f.eval(&grid.center(c), t, &mut g[c * n..(c + 1) * n]);
        }
    }
    g
}

/// Half-bandwidth of the Jacobian in the cell-major unknown ordering.
pub(crate) fn bandwidth(grid: &Grid, n: usize) -> usize {
    grid.neighbour_stride() * n + n - 1
}

/// Implicit Euler residual
/// `(u_new - u_old)/dt - div_h F(u_new) - f(u_new) - g(., t_new)`, cell-major.
pub fn fv_residual(
    spec: &ModelSpec,
    u_new: &Field,
    u_old: &Field,
    dt: f64,
    forcing: Option<&dyn Forcing>,
    t_new: f64,
) -> Result<Vec<f64>> {
    u_new.same_layout(u_old)?;
    if u_new.n() != spec.n() || u_new.grid().dim() != spec.d() {
        return Err(Error::invalid(
            "field does not match the model's species count or dimension",
        ));
    }
    if let Some(k) = u_new.data().iter().position(|x| *x <= 0.0) {
        return Err(Error::invalid(format!(
            "entropy variables need u > 0; cell {} species {} is {}",
            k / u_new.n(),
            k % u_new.n(),
            u_new.data()[k]
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("time step {dt} must be positive")));
    }
    let g = sample_forcing(forcing, u_new.grid(), spec.n(), t_new);
    let w: Vec<f64> = u_new.data().iter().map(|x| x.ln()).collect();
    let mut r = vec![0.0; w.len()];
    Assembler::new(spec, u_new.grid()).assemble(&w, u_old.data(), dt, &g, &mut r, None);
    Ok(r)
}

/// Reusable work space for residual and Jacobian assembly.
pub(crate) struct Assembler<'a> {
    spec: &'a ModelSpec,
    grid: &'a Grid,
    faces: Vec<crate::solver::grid::Face>,
    n: usize,
    u: Vec<f64>,
    ubar: Vec<f64>,
    diff: Vec<f64>,
    flux: Vec<f64>,
    dflux: Vec<f64>,
    fbuf: Vec<f64>,
    jbuf: Vec<f64>,
}

impl<'a> Assembler<'a> {
    pub(crate) fn new(spec: &'a ModelSpec, grid: &'a Grid) -> Self {
        let n = spec.n();
        Assembler {
            spec,
            grid,
            faces: grid.faces(),
            n,
            u: Vec::new(),
            ubar: vec![0.0; n],
            diff: vec![0.0; n],
            flux: vec![0.0; n],
            dflux: vec![0.0; n * n],
            fbuf: vec![0.0; n],
            jbuf: vec![0.0; n * n],
        }
    }

    /// Fills `res` and, when given, the Jacobian `d res / d w`.
    pub(crate) fn assemble(
        &mut self,
        w: &[f64],
        u_old: &[f64],
        dt: f64,
        g: &[f64],
        res: &mut [f64],
        mut jac: Option<&mut BandMatrix>,
    ) {
        let n = self.n;
        let spec = self.spec;
        self.u.clear();
        self.u.extend(w.iter().map(|x| x.exp()));
        if let Some(j) = jac.as_deref_mut() {
            j.clear();
        }

        for c in 0..self.grid.num_cells() {
            let uc = &self.u[c * n..(c + 1) * n];
            spec.reaction().eval_into(uc, &mut self.fbuf);
            for i in 0..n {
                let k = c * n + i;
                res[k] = (uc[i] - u_old[k]) / dt - self.fbuf[i] - g[k];
            }
            if let Some(j) = jac.as_deref_mut() {
                spec.reaction().jacobian_into(uc, &mut self.jbuf);
                for i in 0..n {
                    for m in 0..n {
                        let d = if i == m { 1.0 / dt } else { 0.0 };
                        j.add(c * n + i, c * n + m, (d - self.jbuf[i * n + m]) * uc[m]);
                    }
                }
            }
        }

        for f in 0..self.faces.len() {
            let face = self.faces[f];
            let dx = self.grid.dx(face.axis);
            let (l, r) = (face.left * n, face.right * n);
            for i in 0..n {
                self.ubar[i] = 0.5 * (self.u[l + i] + self.u[r + i]);
                self.diff[i] = w[r + i] - w[l + i];
            }
            let ub = &self.ubar;
            let dd = &self.diff;
            for i in 0..n {
                let crowd = spec.self_rate(i, ub);
                let cross: f64 = (0..n).map(|m| spec.a(i, m) * ub[m] * dd[m]).sum();
                // sum_m B_im D_m = crowd u_i D_i + u_i sum_m a_im u_m D_m
                let bd = crowd * ub[i] * dd[i] + ub[i] * cross;
                self.flux[i] = bd / dx - ub[i] * spec.drift(i)[face.axis];
                if jac.is_some() {
                    for j in 0..n {
                        let mut v = spec.a(i, j) * ub[i] * (dd[i] + dd[j]);
                        if i == j {
                            v += crowd * dd[i] + cross;
                        }
                        v /= dx;
                        if i == j {
                            v -= spec.drift(i)[face.axis];
                        }
                        self.dflux[i * n + j] = v;
                    }
                }
            }
            let s = 1.0 / dx;
            for i in 0..n {
                res[l + i] -= self.flux[i] * s;
                res[r + i] += self.flux[i] * s;
            }
            if let Some(jm) = jac.as_deref_mut() {
                for i in 0..n {
                    for j in 0..n {
                        // B_ij(ubar) = A_ij(ubar) ubar_j
                        let b = spec.diffusion_entry(ub, i, j) * ub[j] / dx;
                        let half = 0.5 * self.dflux[i * n + j];
                        let d_wl = -b + half * self.u[l + j];
                        let d_wr = b + half * self.u[r + j];
                        jm.add(l + i, l + j, -d_wl * s);
                        jm.add(l + i, r + j, -d_wr * s);
                        jm.add(r + i, l + j, d_wl * s);
                        jm.add(r + i, r + j, d_wr * s);
                    }
                }
            }
        }
    }
}
