//! Term-by-term evaluation of the approximate entropy identity for the
//! doubly regularized relative entropy.
//!
//! With `phi^M = phi_K^M(u + eps)`, `phi^L = phi_K^L(u + eps)`,
//! `J_i(u) = sum_l A_il(u) grad u_l - u_i b_i` and `f` including any
//! forcing, the identity reads
//! `[H_{K,eps}^{M,L}(u|v) + sum_i pi_i e^{-lambda_i} int phi^M]_0^s
//!   = G_1 + ... + G_6 + I_1 + ... + I_12`.
//! Terms without gradients use cell midpoints; terms with gradients are
//! summed over interior faces with face-averaged states and difference
//! quotients; time integrals use the trapezoid rule over snapshots.

use std::fmt::Write as _;

use crate::entropy::{cutoff_entropy_offset, double_cutoff_relative_entropy, Cutoff, CutoffSpec};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::solver::{Field, Forcing, Grid, StrongProxy, Trajectory};

/// Indices of the terms that carry a derivative of a cutoff.
pub const CUTOFF_DERIVATIVE_G: [usize; 4] = [1, 2, 3, 4];
pub const CUTOFF_DERIVATIVE_I: [usize; 6] = [0, 1, 2, 4, 6, 8];

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyBalanceTerms {
    pub window: (f64, f64),
    /// `G_1 .. G_6`.
    pub g: [f64; 6],
    /// `I_1 .. I_12`.
    pub i: [f64; 12],
    /// `H_{K,eps}^{M,L}(u|v) |_0^s`.
    pub entropy_change: f64,
    /// `sum_i pi_i e^{-lambda_i} int phi^M |_0^s`.
    pub offset_change: f64,
    pub residual: f64,
    pub snapshots: usize,
}

impl EntropyBalanceTerms {
    pub fn lhs(&self) -> f64 {
        self.entropy_change + self.offset_change
    }

    pub fn rhs(&self) -> f64 {
        self.g.iter().sum::<f64>() + self.i.iter().sum::<f64>()
    }

    /// Terms carrying a first or second derivative of a cutoff.
    pub fn cutoff_derivative_terms(&self) -> Vec<(String, f64)> {
        CUTOFF_DERIVATIVE_G
            .iter()
            .map(|&k| (format!("G{}", k + 1), self.g[k]))
            .chain(
                CUTOFF_DERIVATIVE_I
                    .iter()
                    .map(|&k| (format!("I{}", k + 1), self.i[k])),
            )
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.g.iter().chain(&self.i).all(|x| x.is_finite()) && self.residual.is_finite()
    }

    /// Two-column CSV `term,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("term,value\n");
        for (k, v) in self.g.iter().enumerate() {
            let _ = writeln!(out, "G{},{v:.16e}", k + 1);
        }
        for (k, v) in self.i.iter().enumerate() {
            let _ = writeln!(out, "I{},{v:.16e}", k + 1);
        }
        let _ = writeln!(out, "entropy_change,{:.16e}", self.entropy_change);
        let _ = writeln!(out, "offset_change,{:.16e}", self.offset_change);
        let _ = writeln!(out, "lhs,{:.16e}", self.lhs());
        let _ = writeln!(out, "rhs,{:.16e}", self.rhs());
        let _ = writeln!(out, "residual,{:.16e}", self.residual);
        out
    }
}

struct Ctx<'a> {
    spec: &'a ModelSpec,
    upper: Cutoff,
    lower: Cutoff,
    eps: f64,
}

impl Ctx<'_> {
    /// `S = sum_l pi_l [(u_l + eps)(log(u_l + eps) + lambda_l - 1) + e^{-lambda_l}]`.
    fn big_s(&self, u: &[f64]) -> f64 {
        let (pi, la) = (self.spec.pi(), self.spec.lambda());
        (0..u.len())
            .map(|l| {
                let ue = u[l] + self.eps;
                pi[l] * (ue * (ue.ln() + la[l] - 1.0) + (-la[l]).exp())
            })
            .sum()
    }

    fn shifted_sum(&self, u: &[f64]) -> f64 {
        u.iter().sum::<f64>() + self.eps * u.len() as f64
    }

    /// Reaction terms `G_5, G_6, I_8, I_9, I_11` at one cell.
    fn cell_terms(
        &self,
        u: &[f64],
        v: &[f64],
        fu: &[f64],
        fv: &[f64],
        g: &mut [f64; 6],
        t: &mut [f64; 12],
    ) {
        let (pi, la) = (self.spec.pi(), self.spec.lambda());
        let n = u.len();
        let s = self.shifted_sum(u);
        let m = self.upper.jet_of_sum(s);
        let l = self.lower.jet_of_sum(s);
        let big_s = self.big_s(u);
        let sum_f: f64 = fu.iter().sum();
        g[4] += m.d1 * big_s * sum_f;
        let mut weighted_lv = 0.0;
        for i in 0..n {
            let ue = u[i] + self.eps;
            let lu = ue.ln() + la[i];
            let lv = v[i].ln() + la[i];
            g[5] += pi[i] * m.value * lu * fu[i];
            t[7] -= pi[i] * l.value * lv * fu[i];
            weighted_lv += pi[i] * ue * lv;
            t[10] -= pi[i] * (ue / v[i] * l.value - 1.0) * fv[i];
        }
        t[8] -= l.d1 * weighted_lv * sum_f;
    }

    /// Gradient terms at one face along `axis`; `gu`, `gv` are difference
    /// quotients and `u`, `v` face averages.
    #[allow(clippy::too_many_arguments)]
    fn face_terms(
        &self,
        axis: usize,
        u: &[f64],
        v: &[f64],
        gu: &[f64],
        gv: &[f64],
        g: &mut [f64; 6],
        t: &mut [f64; 12],
    ) {
        let spec = self.spec;
        let (pi, la) = (spec.pi(), spec.lambda());
        let n = u.len();
        let s = self.shifted_sum(u);
        let m = self.upper.jet_of_sum(s);
        let l = self.lower.jet_of_sum(s);

        let mut ju = vec![0.0; n];
        let mut jv = vec![0.0; n];
        let mut au = vec![0.0; n];
        let mut av = vec![0.0; n];
        for i in 0..n {
            au[i] = (0..n).map(|k| spec.diffusion_entry(u, i, k) * gu[k]).sum();
            av[i] = (0..n).map(|k| spec.diffusion_entry(v, i, k) * gv[k]).sum();
            let b = spec.drift(i)[axis];
            ju[i] = au[i] - u[i] * b;
            jv[i] = av[i] - v[i] * b;
        }
        let sum_j: f64 = ju.iter().sum();
        let sum_gu: f64 = gu.iter().sum();

        let big_s = self.big_s(u);
        let mut pl_j = 0.0; // sum_i pi_i (log(u_i + eps) + lambda_i) J_i
        let mut pl_g = 0.0; // sum_k pi_k (log(u_k + eps) + lambda_k) grad u_k
        let mut lv_gu = 0.0;
        let mut lv_j = 0.0;
        let mut ue_lv = 0.0;
        let mut ue_gv = 0.0;
        let mut ue_jv = 0.0;
        for i in 0..n {
            let ue = u[i] + self.eps;
            let lu = ue.ln() + la[i];
            let lv = v[i].ln() + la[i];
            let w = pi[i];
            g[0] -= w * m.value * ju[i] * gu[i] / ue;
            pl_j += w * lu * ju[i];
            pl_g += w * lu * gu[i];
            lv_gu += w * lv * gu[i];
            lv_j += w * lv * ju[i];
            ue_lv += w * ue * lv;
            ue_gv += w * ue * gv[i] / v[i];
            ue_jv += w * ue * jv[i] / v[i];
            t[3] += w * l.value * au[i] * gv[i] / v[i];
            t[5] += w * l.value * jv[i] * gu[i] / v[i];
            t[9] -= w * ue * l.value * av[i] * gv[i] / (v[i] * v[i]);
            t[11] += self.eps * w * l.value * spec.drift(i)[axis] * gv[i] / v[i];
        }
        g[1] -= m.d2 * big_s * sum_j * sum_gu;
        g[2] -= m.d1 * pl_j * sum_gu;
        g[3] -= m.d1 * sum_j * pl_g;
        t[0] += l.d1 * sum_j * lv_gu;
        t[1] += l.d1 * lv_j * sum_gu;
        t[2] += l.d2 * ue_lv * sum_j * sum_gu;
        t[4] += l.d1 * sum_j * ue_gv;
        t[6] += l.d1 * ue_jv * sum_gu;
    }
}

/// Spatial integrals of all 18 integrands at one time.
fn snapshot_terms(
    ctx: &Ctx<'_>,
    u: &Field,
    v: &Field,
    forcing: Option<&dyn Forcing>,
    t: f64,
) -> ([f64; 6], [f64; 12]) {
    let spec = ctx.spec;
    let grid = u.grid();
    let n = spec.n();
    let w = grid.cell_measure();
    let mut g = [0.0; 6];
    let mut i = [0.0; 12];
    let mut fu = vec![0.0; n];
    let mut fv = vec![0.0; n];
    let mut gx = vec![0.0; n];
    for c in 0..grid.num_cells() {
        let (uc, vc) = (u.cell(c), v.cell(c));
        spec.reaction().eval_into(uc, &mut fu);
        spec.reaction().eval_into(vc, &mut fv);
        if let Some(f) = forcing {
            f.eval(&grid.center(c), t, &mut gx);
            for k in 0..n {
                fu[k] += gx[k];
                fv[k] += gx[k];
            }
        }
        ctx.cell_terms(uc, vc, &fu, &fv, &mut g, &mut i);
    }
    let (mut ub, mut vb, mut gu, mut gv) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for face in grid.faces() {
        let dx = grid.dx(face.axis);
        let (ul, ur) = (u.cell(face.left), u.cell(face.right));
        let (vl, vr) = (v.cell(face.left), v.cell(face.right));
        for k in 0..n {
            ub[k] = 0.5 * (ul[k] + ur[k]);
            vb[k] = 0.5 * (vl[k] + vr[k]);
            gu[k] = (ur[k] - ul[k]) / dx;
            gv[k] = (vr[k] - vl[k]) / dx;
        }
        ctx.face_terms(face.axis, &ub, &vb, &gu, &gv, &mut g, &mut i);
    }
    g.iter_mut().for_each(|x| *x *= w);
    i.iter_mut().for_each(|x| *x *= w);
    (g, i)
}

/// Snapshot times of `traj` inside `window`, with the endpoints included.
pub(crate) fn window_times(traj: &Trajectory, window: (f64, f64)) -> Result<Vec<f64>> {
    let (a, b) = window;
    let (t0, t1) = (traj.times()[0], traj.final_time());
    let slack = 1e-12 * (1.0 + t1.abs());
    if !(a <= b) || a < t0 - slack || b > t1 + slack {
        return Err(Error::invalid(format!(
            "window [{a}, {b}] is not inside the trajectory range [{t0}, {t1}]"
        )));
    }
    let mut ts = vec![a];
    ts.extend(
        traj.times()
            .iter()
            .copied()
            .filter(|&t| t > a + slack && t < b - slack),
    );
    if b > a {
        ts.push(b);
    }
    Ok(ts)
}

fn check_positive(f: &Field, what: &str, t: f64) -> Result<()> {
    if f.min() <= 0.0 {
        return Err(Error::invalid(format!(
            "{what} has a nonpositive density at t = {t}"
        )));
    }
    Ok(())
}

/// Evaluates the 18 terms of the approximate entropy identity over `window`
/// for `u` from `traj_u` and `v` from `proxy`, plus the residual
/// `lhs - sum(terms)`. A manufactured proxy contributes its forcing to both
/// reaction slots.
pub fn entropy_balance_terms(
    spec: &ModelSpec,
    cut: &CutoffSpec,
    traj_u: &Trajectory,
    proxy: &StrongProxy,
    window: (f64, f64),
) -> Result<EntropyBalanceTerms> {
    cut.validate()?;
    let times = window_times(traj_u, window)?;
    let grid: Grid = traj_u.first().grid().clone();
    let ctx = Ctx {
        spec,
        upper: cut.upper(),
        lower: cut.lower(),
        eps: cut.eps,
    };
    let forcing = proxy.forcing();

    let mut g = [0.0; 6];
    let mut i = [0.0; 12];
    let mut prev: Option<(f64, [f64; 6], [f64; 12])> = None;
    let mut ends = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let u = traj_u.at(t);
        let v = proxy.at(&grid, t)?;
        check_positive(&u, "u", t)?;
        check_positive(&v, "v", t)?;
        let (gs, is) = snapshot_terms(&ctx, &u, &v, forcing, t);
        if let Some((tp, gp, ip)) = prev {
            let h = 0.5 * (t - tp);
            for q in 0..6 {
                g[q] += h * (gp[q] + gs[q]);
            }
            for q in 0..12 {
                i[q] += h * (ip[q] + is[q]);
            }
        }
        prev = Some((t, gs, is));
        if k == 0 || k == times.len() - 1 {
            let h = double_cutoff_relative_entropy(spec, cut, &u, &v)?;
            let o = cutoff_entropy_offset(spec, cut, &u)?;
            ends.push((h, o));
        }
    }
    let (h0, o0) = ends[0];
    let (h1, o1) = *ends.last().expect("window has a start");
    let mut out = EntropyBalanceTerms {
        window,
        g,
        i,
        entropy_change: h1 - h0,
        offset_change: o1 - o0,
        residual: 0.0,
        snapshots: times.len(),
    };
    out.residual = out.lhs() - out.rhs();
    Ok(out)
}
