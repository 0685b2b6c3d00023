//! Primal-dual interior-point method with Mehrotra predictor-corrector.
//!
//! Inequalities are written in slack form `g(x) + w = 0, w >= 0`. Each Newton
//! step eliminates `w` and `z` and factors the quasi-definite system
//!
//! ```text
//! [ H + Jᵀ W⁻¹Z J + δI   Eᵀ ] [dx]
//! [ E                  -δI ] [dy]
//! ```
//!
//! where `H` is the Lagrangian Hessian (objective plus `2 z_k w_k u_k u_kᵀ`
//! for each rank-one constraint).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::QcqpError;
use crate::kkt::{kkt_residuals, KktResiduals, Multipliers};
use crate::ldl::{DynamicReg, SkylineLdl};
use crate::ordering::{delay_negative, rcm};
use crate::problem::{Qcqp, RankOneConstraint};
use crate::sparse::{dot, norm_inf, CsrMatrix, SparseVec};

type Iterate = (f64, Vec<f64>, Vec<f64>, Vec<f64>);
/// `(dx, dw, dz, dy, relative solve residual)`.
type Step = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
    /// Static diagonal regularization, relative to the scaled problem.
    pub regularization: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol_gap: 1e-8, tol_feas: 1e-8, max_iter: 200, regularization: 1e-10 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), QcqpError> {
        if !(self.tol_gap > 0.0 && self.tol_feas > 0.0) {
            return Err(QcqpError::Config("tolerances must be positive".into()));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(QcqpError::Config("regularization must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    MaxIter,
    Infeasible,
    Unbounded,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Optimal => "optimal",
            Status::MaxIter => "max_iter",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
        };
        f.write_str(s)
    }
}

/// One row of the iteration log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub gap: f64,
    pub primal: f64,
    pub dual: f64,
    pub mu: f64,
    pub step: f64,
}

impl IterationRecord {
    pub const HEADER: &'static str = " iter       objective        gap     primal       dual         mu    step";
}

impl fmt::Display for IterationRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:>5} {:>+15.8e} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>7.4}",
            self.iter, self.objective, self.gap, self.primal, self.dual, self.mu, self.step
        )
    }
}

/// Largest constraint violation at the returned point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// Row index: linear inequalities, then quadratic, then equalities.
    pub row: usize,
    pub violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub multipliers: Multipliers,
    pub objective: f64,
    pub status: Status,
    pub kkt: KktResiduals,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
    pub witness: Option<Witness>,
}

impl Solution {
    /// Iteration log in the fixed column format.
    pub fn log_text(&self) -> String {
        let mut s = String::from(IterationRecord::HEADER);
        s.push('\n');
        for r in &self.log {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }
}

struct Scaled {
    prob: Qcqp,
    /// Original variable is `col[j] * scaled[j]`.
    col: Vec<f64>,
    row_lin: Vec<f64>,
    row_quad: Vec<f64>,
    row_eq: Vec<f64>,
    obj: f64,
}

/// Ruiz equilibration of the stacked constraint Jacobian; returns column scales.
fn column_scales(prob: &Qcqp) -> Vec<f64> {
    let n = prob.n;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut nrows = 0;
    for a in [&prob.a_ineq, &prob.a_eq] {
        entries.extend(a.triplets().into_iter().map(|(i, j, v)| (nrows + i, j, v.abs())));
        nrows += a.nrows();
    }
    for q in &prob.quad {
        let um = q.weight * q.u.max_abs();
        entries.extend(q.g.indices.iter().zip(&q.g.values).map(|(&j, &v)| (nrows, j, v.abs())));
        entries.extend(q.u.indices.iter().zip(&q.u.values).map(|(&j, &v)| (nrows, j, um * v.abs())));
        nrows += 1;
    }
    entries.retain(|e| e.2 > 0.0);
    let mut col = vec![1.0; n];
    let mut row = vec![1.0; nrows];
    for _ in 0..15 {
        let mut rmax = vec![0.0f64; nrows];
        let mut cmax = vec![0.0f64; n];
        for &(i, j, v) in &entries {
            let s = v * row[i] * col[j];
            rmax[i] = rmax[i].max(s);
            cmax[j] = cmax[j].max(s);
        }
        let mut done = true;
        for (r, m) in row.iter_mut().zip(&rmax) {
            if *m > 0.0 {
                *r /= m.sqrt();
                done &= (m - 1.0).abs() < 1e-3;
            }
        }
        for (c, m) in col.iter_mut().zip(&cmax) {
            if *m > 0.0 {
                *c /= m.sqrt();
                done &= (m - 1.0).abs() < 1e-3;
            }
        }
        if done {
            break;
        }
    }
    // keep relative column scales only, anchored at the median
    let mut sorted = col.clone();
    sorted.sort_by(f64::total_cmp);
    let med = sorted[n / 2];
    col.iter_mut().for_each(|c| *c = (*c / med).clamp(1e-8, 1e8));
    col
}

fn scale_problem(prob: &Qcqp) -> Scaled {
    let inv = |m: f64| if m > 0.0 { 1.0 / m } else { 1.0 };
    let col = if prob.n > 0 { column_scales(prob) } else { Vec::new() };
    let scale_cols = |a: &CsrMatrix| {
        let t: Vec<_> = a.triplets().into_iter().map(|(i, j, v)| (i, j, v * col[j])).collect();
        CsrMatrix::from_triplets(a.nrows(), a.ncols(), &t)
    };
    let scale_vec = |v: &SparseVec| {
        SparseVec::new(v.indices.clone(), v.indices.iter().zip(&v.values).map(|(&j, &x)| x * col[j]).collect())
    };
    let p_col = {
        let t: Vec<_> = prob.p.triplets().into_iter().map(|(i, j, v)| (i, j, v * col[i] * col[j])).collect();
        CsrMatrix::from_triplets(prob.n, prob.n, &t)
    };
    let c_col: Vec<f64> = prob.c.iter().zip(&col).map(|(v, s)| v * s).collect();
    let a_ineq = scale_cols(&prob.a_ineq);
    let a_eq = scale_cols(&prob.a_eq);
    let quad_col: Vec<RankOneConstraint> = prob
        .quad
        .iter()
        .map(|q| RankOneConstraint { weight: q.weight, u: scale_vec(&q.u), g: scale_vec(&q.g), h: q.h })
        .collect();

    let row_scale = |a: &CsrMatrix| -> Vec<f64> {
        (0..a.nrows()).map(|i| inv(norm_inf(a.row(i).1))).collect()
    };
    let row_lin = row_scale(&a_ineq);
    let row_eq = row_scale(&a_eq);
    let row_quad: Vec<f64> = quad_col
        .iter()
        .map(|q| inv(q.g.max_abs().max(q.weight * q.u.max_abs().powi(2))))
        .collect();
    let obj = inv(p_col.max_abs().max(norm_inf(&c_col)).max(1e-300)).min(1.0e300);

    let scale_rows = |a: &CsrMatrix, s: &[f64]| {
        let t: Vec<_> = a.triplets().into_iter().map(|(i, j, v)| (i, j, v * s[i])).collect();
        CsrMatrix::from_triplets(a.nrows(), a.ncols(), &t)
    };
    let sp = Qcqp {
        n: prob.n,
        p: p_col.scaled(obj),
        c: c_col.iter().map(|v| v * obj).collect(),
        c0: prob.c0 * obj,
        a_ineq: scale_rows(&a_ineq, &row_lin),
        b_ineq: prob.b_ineq.iter().zip(&row_lin).map(|(b, s)| b * s).collect(),
        a_eq: scale_rows(&a_eq, &row_eq),
        b_eq: prob.b_eq.iter().zip(&row_eq).map(|(b, s)| b * s).collect(),
        quad: quad_col
            .into_iter()
            .zip(&row_quad)
            .map(|(q, &s)| RankOneConstraint { weight: q.weight * s, u: q.u, g: q.g.scaled(s), h: q.h * s })
            .collect(),
    };
    Scaled { prob: sp, col, row_lin, row_quad, row_eq, obj }
}

impl Scaled {
    fn to_original(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.col).map(|(v, c)| v * c).collect()
    }

    fn to_scaled(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.col).map(|(v, c)| v / c).collect()
    }

    fn unscale(&self, z: &[f64], y: &[f64]) -> Multipliers {
        let m_lin = self.row_lin.len();
        let zs = z
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let r = if k < m_lin { self.row_lin[k] } else { self.row_quad[k - m_lin] };
                v * r / self.obj
            })
            .collect();
        let ys = y.iter().zip(&self.row_eq).map(|(v, r)| v * r / self.obj).collect();
        Multipliers { z: zs, y: ys }
    }
}

/// Jacobian rows of all inequalities at `x`.
fn jacobian_rows(p: &Qcqp, x: &[f64]) -> Vec<SparseVec> {
    let mut rows = Vec::with_capacity(p.m_ineq());
    for i in 0..p.a_ineq.nrows() {
        let (c, v) = p.a_ineq.row(i);
        rows.push(SparseVec::new(c.to_vec(), v.to_vec()));
    }
    rows.extend(p.quad.iter().map(|q| q.gradient(x)));
    rows
}

struct Newton<'a> {
    p: &'a Qcqp,
    rows: &'a [SparseVec],
    w: &'a [f64],
    z: &'a [f64],
    kkt: CsrMatrix,
    fac: SkylineLdl,
    delta: f64,
}

impl<'a> Newton<'a> {
    fn matvec_true(&self, v: &[f64]) -> Vec<f64> {
        let n = self.p.n;
        let mut out = self.kkt.mul_vec(v);
        for i in 0..out.len() {
            if i < n {
                out[i] -= self.delta * v[i];
            } else {
                out[i] += self.delta * v[i];
            }
        }
        out
    }

    /// Solves for `(dx, dw, dz, dy)` given residuals.
    fn step(
        &self,
        rd: &[f64],
        rp: &[f64],
        re: &[f64],
        rc: &[f64],
    ) -> Step {
        let n = self.p.n;
        let m = rp.len();
        let mut rhs = vec![0.0; n + re.len()];
        for i in 0..n {
            rhs[i] = -rd[i];
        }
        for k in 0..m {
            let coef = (rc[k] - self.z[k] * rp[k]) / self.w[k];
            self.rows[k].axpy_into(coef, &mut rhs[..n]);
        }
        for (j, &r) in re.iter().enumerate() {
            rhs[n + j] = -r;
        }
        let residual = |sol: &[f64]| -> Vec<f64> {
            let kv = self.matvec_true(sol);
            rhs.iter().zip(&kv).map(|(b, k)| b - k).collect()
        };
        let mut sol = self.fac.solve(&rhs);
        let bnorm = norm_inf(&rhs).max(1e-300);
        let mut res = residual(&sol);
        let mut rnorm = norm_inf(&res);
        for _ in 0..REFINE_STEPS {
            if !(rnorm > 1e-14 * bnorm) {
                break;
            }
            let corr = self.fac.solve(&res);
            let cand: Vec<f64> = sol.iter().zip(&corr).map(|(s, c)| s + c).collect();
            let cres = residual(&cand);
            let cnorm = norm_inf(&cres);
            if !(cnorm < rnorm) {
                break;
            }
            sol = cand;
            res = cres;
            rnorm = cnorm;
        }
        let dx = sol[..n].to_vec();
        let dy = sol[n..].to_vec();
        let mut dw = vec![0.0; m];
        let mut dz = vec![0.0; m];
        for k in 0..m {
            let jdx = self.rows[k].dot(&dx);
            dw[k] = -rp[k] - jdx;
            dz[k] = (-rc[k] - self.z[k] * dw[k]) / self.w[k];
        }
        (dx, dw, dz, dy, rnorm / bnorm)
    }
}

fn assemble_kkt(
    p: &Qcqp,
    rows: &[SparseVec],
    w: &[f64],
    z: &[f64],
    delta: f64,
) -> CsrMatrix {
    let n = p.n;
    let neq = p.b_eq.len();
    let m_lin = p.b_ineq.len();
    let mut t: Vec<(usize, usize, f64)> = p.p.triplets();
    for (k, q) in p.quad.iter().enumerate() {
        let c = 2.0 * q.weight * z[m_lin + k];
        for (&i, &ui) in q.u.indices.iter().zip(&q.u.values) {
            for (&j, &uj) in q.u.indices.iter().zip(&q.u.values) {
                t.push((i, j, c * ui * uj));
            }
        }
    }
    for (k, r) in rows.iter().enumerate() {
        let s = z[k] / w[k];
        for (&i, &vi) in r.indices.iter().zip(&r.values) {
            for (&j, &vj) in r.indices.iter().zip(&r.values) {
                t.push((i, j, s * vi * vj));
            }
        }
    }
    for i in 0..n {
        t.push((i, i, delta));
    }
    for (j, i, v) in p.a_eq.triplets() {
        t.push((n + j, i, v));
        t.push((i, n + j, v));
    }
    for j in 0..neq {
        t.push((n + j, n + j, -delta));
    }
    CsrMatrix::from_triplets(n + neq, n + neq, &t)
}

fn axpy(v: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    v.iter().zip(d).map(|(vi, di)| vi + a * di).collect()
}

/// Largest of the stationarity, slack and equality residuals.
fn infeasibility(p: &Qcqp, x: &[f64], w: &[f64], z: &[f64], y: &[f64]) -> f64 {
    let rows = jacobian_rows(p, x);
    let mut rd = p.objective_gradient(x);
    for (k, r) in rows.iter().enumerate() {
        r.axpy_into(z[k], &mut rd);
    }
    for (a, b) in rd.iter_mut().zip(&p.a_eq.tr_mul_vec(y)) {
        *a += b;
    }
    let g = p.inequality_values(x);
    let rp = g.iter().zip(w).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
    norm_inf(&rd).max(rp).max(norm_inf(&p.equality_residual(x)))
}

/// Normalized multipliers that prove no feasible point lies near `x`:
/// the weighted constraint gradients nearly cancel while the weighted
/// constraint values are positive.
fn farkas_certificate(p: &Qcqp, x: &[f64], rows: &[SparseVec], g: &[f64], re: &[f64], z: &[f64], y: &[f64]) -> bool {
    let scale = norm_inf(z).max(norm_inf(y));
    if !(scale > FARKAS_SCALE) {
        return false;
    }
    let zh: Vec<f64> = z.iter().map(|v| v / scale).collect();
    let yh: Vec<f64> = y.iter().map(|v| v / scale).collect();
    let mut jt = p.a_eq.tr_mul_vec(&yh);
    for (k, r) in rows.iter().enumerate() {
        r.axpy_into(zh[k], &mut jt);
    }
    let val = dot(&zh, g) + dot(&yh, re);
    let jt1: f64 = jt.iter().map(|v| v.abs()).sum();
    val > 1e-6 && jt1 * (1.0 + norm_inf(x)) <= 1e-4 * val
}

/// Whether `d` is a direction of unbounded descent: no curvature, strictly
/// decreasing cost, and no constraint ever blocks it.
fn is_recession_ray(p: &Qcqp, d: &[f64]) -> bool {
    let dn = norm_inf(d);
    if !(dn > 0.0) {
        return false;
    }
    let d: Vec<f64> = d.iter().map(|v| v / dn).collect();
    let tol = 1e-8;
    let cd = dot(&p.c, &d);
    if !(cd < -1e-6 * norm_inf(&p.c)) {
        return false;
    }
    let pscale = p.p.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    norm_inf(&p.p.mul_vec(&d)) <= tol * pscale
        && p.a_ineq.mul_vec(&d).iter().all(|&v| v <= tol)
        && norm_inf(&p.a_eq.mul_vec(&d)) <= tol
        && p.quad.iter().all(|q| q.u.dot(&d).abs() <= 1e-4 && q.g.dot(&d) <= tol)
}

const REFINE_STEPS: usize = 20;
/// Relative residual above which a Newton solve is retried.
const SOLVE_ACCURACY: f64 = 1e-8;
const MAX_REGULARIZATION: f64 = 1e-2;

/// Extra iterations taken after the tolerances are first met.
const POLISH_ITERS: usize = 3;
/// Multiplier magnitude from which infeasibility certificates are tried.
const FARKAS_SCALE: f64 = 1e6;
/// Consecutive ray-like Newton directions before declaring unboundedness.
const RAY_ITERS: usize = 5;
/// Iterations without a better best iterate before giving up.
const STALL_ITERS: usize = 30;

/// Largest `alpha <= 1` with `v + alpha dv >= 0`.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    let mut a = 1.0f64;
    for (&vi, &di) in v.iter().zip(dv) {
        if di < 0.0 {
            a = a.min(-vi / di);
        }
    }
    a
}

/// Solves `prob` from the optional starting point `x0`.
pub fn solve(prob: &Qcqp, x0: Option<&[f64]>, cfg: &SolverConfig) -> Result<Solution, QcqpError> {
    prob.validate()?;
    cfg.validate()?;
    if let Some(x0) = x0 {
        if x0.len() != prob.n {
            return Err(QcqpError::Dimension("starting point".into()));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(QcqpError::NonFinite);
        }
    }
    let sc = scale_problem(prob);
    let sp = &sc.prob;
    let n = sp.n;
    let m = sp.m_ineq();
    let neq = sp.b_eq.len();

    let mut x = x0.map_or_else(|| vec![0.0; n], |v| sc.to_scaled(v));
    let g0 = sp.inequality_values(&x);
    let mut w: Vec<f64> = g0.iter().map(|&g| (-g).max(1.0)).collect();
    let mut z = vec![1.0; m];
    let mut y = vec![0.0; neq];
    let x_scale = 1.0 + norm_inf(&x);

    let mut perm: Option<Vec<usize>> = None;
    let mut signs = vec![1i8; n + neq];
    signs[n..].iter_mut().for_each(|s| *s = -1);

    let mut log = Vec::new();
    let mut history: Vec<(f64, f64)> = Vec::new();
    let mut status = Status::MaxIter;
    let mut iterations = 0;
    let mut last_step = 0.0;
    // (score, x, z, y)
    let mut best: Option<Iterate> = None;
    let mut polish_left = 0;
    let mut ray_count = 0;
    let mut last_improvement = 0;

    for it in 0..=cfg.max_iter {
        iterations = it;
        let g = sp.inequality_values(&x);
        let rp: Vec<f64> = g.iter().zip(&w).map(|(a, b)| a + b).collect();
        let re = sp.equality_residual(&x);
        let rows = jacobian_rows(sp, &x);
        let mut rd = sp.objective_gradient(&x);
        for (k, r) in rows.iter().enumerate() {
            r.axpy_into(z[k], &mut rd);
        }
        let ey = sp.a_eq.tr_mul_vec(&y);
        for (a, b) in rd.iter_mut().zip(&ey) {
            *a += b;
        }
        let mu = if m > 0 { dot(&w, &z) / m as f64 } else { 0.0 };

        let mult = sc.unscale(&z, &y);
        let x_orig = sc.to_original(&x);
        let res = kkt_residuals(prob, &x_orig, &mult);
        let fx = prob.objective(&x_orig);
        log.push(IterationRecord {
            iter: it,
            objective: fx,
            gap: res.gap,
            primal: res.primal,
            dual: res.stationarity,
            mu,
            step: last_step,
        });
        let score = res.max();
        let certified = res.stationary(cfg.tol_feas)
            && res.primal <= cfg.tol_feas
            && res.dual <= cfg.tol_feas
            && res.gap <= cfg.tol_gap
            && res.complementarity <= cfg.tol_gap;
        if certified {
            // once certified, only certified iterates may replace the answer
            if status != Status::Optimal || best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, x.clone(), z.clone(), y.clone()));
            }
            if status != Status::Optimal {
                status = Status::Optimal;
                polish_left = POLISH_ITERS;
            }
        } else if status != Status::Optimal && best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, x.clone(), z.clone(), y.clone()));
            last_improvement = it;
        }
        if status == Status::Optimal {
            if polish_left == 0 {
                break;
            }
            polish_left -= 1;
        }
        if it == cfg.max_iter || (status != Status::Optimal && it >= last_improvement + STALL_ITERS) {
            break;
        }
        if status != Status::Optimal && norm_inf(&x) > 1e15 * x_scale {
            status = Status::Unbounded;
            break;
        }
        if status != Status::Optimal && res.primal > cfg.tol_feas && farkas_certificate(sp, &x, &rows, &g, &re, &z, &y) {
            status = Status::Infeasible;
            break;
        }

        // stalled primal residual with a growing Lagrangian signals infeasibility
        let pres = norm_inf(&rp).max(norm_inf(&re));
        let lagr = sp.objective(&x) + dot(&z, &g) + dot(&y, &re);
        history.push((pres, lagr));
        if history.len() > 20 {
            let (p_old, l_old) = history[history.len() - 21];
            let recent_min =
                history[history.len() - 20..].iter().map(|h| h.0).fold(f64::INFINITY, f64::min);
            if status != Status::Optimal
                && res.primal > cfg.tol_feas
                && recent_min >= 0.5 * p_old
                && lagr > l_old
                && norm_inf(&z).max(norm_inf(&y)) > 1e3
            {
                status = Status::Infeasible;
                break;
            }
        }

        // predictor; a poor solve means the pivots broke down, so retry with
        // heavier static regularization and let refinement remove the bias.
        // Keep the most accurate attempt: on ill-conditioned but sound pivots
        // extra regularization only adds bias.
        let rc_aff: Vec<f64> = w.iter().zip(&z).map(|(a, b)| a * b).collect();
        let mut delta = cfg.regularization;
        let mut chosen: Option<(Newton, Step)> = None;
        loop {
            let kkt = assemble_kkt(sp, &rows, &w, &z, delta);
            let pm = perm.get_or_insert_with(|| delay_negative(&rcm(&kkt), &kkt, &signs));
            let fac = SkylineLdl::factor(&kkt, pm, &signs, DynamicReg::default());
            let newton = Newton { p: sp, rows: &rows, w: &w, z: &z, kkt, fac, delta };
            let aff = newton.step(&rd, &rp, &re, &rc_aff);
            let acc = aff.4;
            let better = chosen.as_ref().is_none_or(|c| acc < c.1 .4 || !c.1 .4.is_finite());
            if better {
                chosen = Some((newton, aff));
            }
            if acc <= SOLVE_ACCURACY || delta >= MAX_REGULARIZATION || (!better && acc.is_finite()) {
                break;
            }
            delta = (delta * 100.0).max(1e-12);
        }
        let (newton, (dx_a, dw_a, dz_a, dy_a, _)) = chosen.expect("at least one factorization");
        let (dx, dw, dz, dy) = if m > 0 {
            let a_aff = max_step(&w, &dw_a).min(max_step(&z, &dz_a));
            let mu_aff = w
                .iter()
                .zip(&dw_a)
                .zip(z.iter().zip(&dz_a))
                .map(|((wi, dwi), (zi, dzi))| (wi + a_aff * dwi) * (zi + a_aff * dzi))
                .sum::<f64>()
                / m as f64;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
            let rc: Vec<f64> = (0..m).map(|k| w[k] * z[k] + dw_a[k] * dz_a[k] - sigma * mu).collect();
            let (dx, dw, dz, dy, _) = newton.step(&rd, &rp, &re, &rc);
            (dx, dw, dz, dy)
        } else {
            (dx_a, dw_a, dz_a, dy_a)
        };
        if status != Status::Optimal && is_recession_ray(sp, &dx) {
            ray_count += 1;
            if ray_count >= RAY_ITERS {
                status = Status::Unbounded;
                break;
            }
        } else {
            ray_count = 0;
        }
        let mut alpha = (0.99 * max_step(&w, &dw).min(max_step(&z, &dz))).min(1.0);
        // curvature of the quadratic rows can push the linearised step off the
        // central path; backtrack until infeasibility is compatible with mu
        let infeas0 = norm_inf(&rd).max(pres);
        let trial = |alpha: f64| {
            let xt = axpy(&x, alpha, &dx);
            let wt = axpy(&w, alpha, &dw);
            let zt = axpy(&z, alpha, &dz);
            let yt = axpy(&y, alpha, &dy);
            (infeasibility(sp, &xt, &wt, &zt, &yt), xt, wt, zt, yt)
        };
        let mut accepted = trial(alpha);
        if !sp.quad.is_empty() {
            for _ in 0..30 {
                let mu_t = if m > 0 { dot(&accepted.2, &accepted.3) / m as f64 } else { 0.0 };
                if !accepted.0.is_finite() {
                    // fall through to halving
                } else if accepted.0 <= infeas0.max(100.0 * mu_t.min(mu)) {
                    break;
                }
                alpha *= 0.5;
                accepted = trial(alpha);
            }
        }
        let (_, xt, wt, zt, yt) = accepted;
        x = xt;
        w = wt;
        z = zt;
        y = yt;
        last_step = alpha;
        if x.iter().chain(&w).chain(&z).chain(&y).any(|v| !v.is_finite()) {
            break;
        }
    }

    let (_, x, z, y) = best.expect("at least one iterate");
    let x = sc.to_original(&x);
    let multipliers = sc.unscale(&z, &y);
    let kkt = kkt_residuals(prob, &x, &multipliers);
    let witness = if status == Status::Optimal {
        None
    } else {
        let (violation, row) = prob.max_violation(&x);
        Some(Witness { row, violation })
    };
    Ok(Solution {
        objective: prob.objective(&x),
        x,
        multipliers,
        status,
        kkt,
        iterations,
        log,
        witness,
    })
}
