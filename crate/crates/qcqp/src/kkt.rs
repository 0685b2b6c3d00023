//! First-order optimality residuals.

use serde::{Deserialize, Serialize};

use crate::problem::Qcqp;
use crate::sparse::{dot, norm_inf, CsrMatrix};

/// Lagrange multipliers: `z` for inequalities (linear then quadratic), `y` for equalities.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

/// Scaled KKT residuals. All entries are nonnegative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `‖∇f + Jᵀz + Eᵀy‖∞` over the size of its terms.
    pub stationarity: f64,
    /// Largest inequality violation or equality residual over data scale.
    pub primal: f64,
    /// Largest negative multiplier magnitude over multiplier scale.
    pub dual: f64,
    /// `max_i |z_i g_i(x)|` over objective scale.
    pub complementarity: f64,
    /// Lagrangian gap `|zᵀg(x) + yᵀ(Ex - f)|` over objective scale.
    pub gap: f64,
    /// Stationarity attainable in floating point: machine epsilon times the
    /// absolute sizes of the summed terms, on the same scale.
    #[serde(default)]
    pub rounding_floor: f64,
}

/// Multiple of the rounding floor accepted as stationary.
pub const ROUNDING_MULTIPLE: f64 = 1e2;

impl KktResiduals {
    /// Stationarity within `tol`, or within [`ROUNDING_MULTIPLE`] of the rounding floor.
    pub fn stationary(&self, tol: f64) -> bool {
        self.stationarity <= tol.max(ROUNDING_MULTIPLE * self.rounding_floor)
    }

    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity).max(self.gap)
    }
}

/// Evaluates residuals of `(x, z, y)` for `prob`.
pub fn kkt_residuals(prob: &Qcqp, x: &[f64], mult: &Multipliers) -> KktResiduals {
    assert_eq!(x.len(), prob.n, "candidate dimension");
    assert_eq!(mult.z.len(), prob.m_ineq(), "inequality multiplier dimension");
    assert_eq!(mult.y.len(), prob.b_eq.len(), "equality multiplier dimension");
    let m_lin = prob.b_ineq.len();

    let px = prob.p.mul_vec(x);
    let jz_lin = prob.a_ineq.tr_mul_vec(&mult.z[..m_lin]);
    let mut jz_quad = vec![0.0; prob.n];
    for (q, &z) in prob.quad.iter().zip(&mult.z[m_lin..]) {
        q.grad_axpy(x, z, &mut jz_quad);
    }
    let ey = prob.a_eq.tr_mul_vec(&mult.y);
    let mut r = vec![0.0; prob.n];
    for i in 0..prob.n {
        r[i] = px[i] + prob.c[i] + jz_lin[i] + jz_quad[i] + ey[i];
    }
    let stat_scale = 1.0
        + norm_inf(&px)
            .max(norm_inf(&prob.c))
            .max(norm_inf(&jz_lin))
            .max(norm_inf(&jz_quad))
            .max(norm_inf(&ey));
    // same sums over absolute values: cancellation inside P x leaves a
    // rounding error of this size in r
    let ax: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let az: Vec<f64> = mult.z.iter().map(|v| v.abs()).collect();
    let ay: Vec<f64> = mult.y.iter().map(|v| v.abs()).collect();
    let mut quad_abs = vec![0.0; prob.n];
    for (q, &z) in prob.quad.iter().zip(&az[m_lin..]) {
        let ux = abs_dot(&q.u.indices, &q.u.values, &ax);
        for (&j, &v) in q.u.indices.iter().zip(&q.u.values) {
            quad_abs[j] += 2.0 * q.weight * ux * v.abs() * z;
        }
        for (&j, &v) in q.g.indices.iter().zip(&q.g.values) {
            quad_abs[j] += v.abs() * z;
        }
    }
    let abs_scale = norm_inf(&abs_mul(&prob.p, &ax))
        .max(norm_inf(&prob.c))
        .max(norm_inf(&abs_tr_mul(&prob.a_ineq, &az[..m_lin])))
        .max(norm_inf(&quad_abs))
        .max(norm_inf(&abs_tr_mul(&prob.a_eq, &ay)));

    let g = prob.inequality_values(x);
    let e = prob.equality_residual(x);
    let viol = g.iter().fold(0.0f64, |m, &v| m.max(v)).max(norm_inf(&e));
    let data_scale = 1.0
        + norm_inf(&prob.b_ineq)
            .max(norm_inf(&prob.b_eq))
            .max(norm_inf(&prob.a_ineq.mul_vec(x)))
            .max(norm_inf(&prob.a_eq.mul_vec(x)));

    let zmax = norm_inf(&mult.z).max(norm_inf(&mult.y));
    let neg = mult.z.iter().fold(0.0f64, |m, &z| m.max(-z));

    let fx = prob.objective(x);
    let obj_scale = 1.0 + fx.abs();
    let comp = g.iter().zip(&mult.z).fold(0.0f64, |m, (gi, zi)| m.max((gi * zi).abs()));
    let gap = (dot(&mult.z, &g) + dot(&mult.y, &e)).abs();

    KktResiduals {
        stationarity: norm_inf(&r) / stat_scale,
        rounding_floor: f64::EPSILON * abs_scale / stat_scale,
        primal: viol / data_scale,
        dual: neg / (1.0 + zmax),
        complementarity: comp / obj_scale,
        gap: gap / obj_scale,
    }
}

fn abs_dot(idx: &[usize], vals: &[f64], ax: &[f64]) -> f64 {
    idx.iter().zip(vals).map(|(&j, v)| v.abs() * ax[j]).sum()
}

/// `|A| |x|` for nonnegative `ax`.
fn abs_mul(a: &CsrMatrix, ax: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| {
            let (cols, vals) = a.row(i);
            abs_dot(cols, vals, ax)
        })
        .collect()
}

/// `|A|ᵀ |z|` for nonnegative `az`.
fn abs_tr_mul(a: &CsrMatrix, az: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.ncols()];
    for (i, &zi) in az.iter().enumerate() {
        let (cols, vals) = a.row(i);
        for (&j, v) in cols.iter().zip(vals) {
            y[j] += v.abs() * zi;
        }
    }
    y
}
