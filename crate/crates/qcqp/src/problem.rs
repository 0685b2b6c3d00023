//! Problem data: convex quadratic objective, affine rows and rank-one
//! quadratic inequalities.

use serde::{Deserialize, Serialize};

use crate::error::QcqpError;
use crate::sparse::{dot, CsrMatrix, SparseVec};

/// Convex constraint `weight * (u·x)^2 + g·x + h <= 0` with `weight >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneConstraint {
    pub weight: f64,
    pub u: SparseVec,
    pub g: SparseVec,
    pub h: f64,
}

impl RankOneConstraint {
    pub fn value(&self, x: &[f64]) -> f64 {
        let ux = self.u.dot(x);
        self.weight * ux * ux + self.g.dot(x) + self.h
    }

    /// Adds `alpha * gradient` at `x` into `y`.
    pub fn grad_axpy(&self, x: &[f64], alpha: f64, y: &mut [f64]) {
        let ux = self.u.dot(x);
        self.u.axpy_into(alpha * 2.0 * self.weight * ux, y);
        self.g.axpy_into(alpha, y);
    }

    /// Gradient as a sparse vector over the union of the `u` and `g` supports.
    pub fn gradient(&self, x: &[f64]) -> SparseVec {
        let ux = self.u.dot(x);
        let mut pairs: Vec<(usize, f64)> = self
            .u
            .indices
            .iter()
            .zip(&self.u.values)
            .map(|(&i, &v)| (i, 2.0 * self.weight * ux * v))
            .chain(self.g.indices.iter().copied().zip(self.g.values.iter().copied()))
            .collect();
        pairs.sort_by_key(|p| p.0);
        let mut idx: Vec<usize> = Vec::with_capacity(pairs.len());
        let mut val: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if idx.last() == Some(&i) {
                *val.last_mut().unwrap() += v;
            } else {
                idx.push(i);
                val.push(v);
            }
        }
        SparseVec::new(idx, val)
    }
}

/// minimize `½ xᵀP x + cᵀx + c0`
/// subject to `A x <= b`, `E x = f`, and rank-one quadratic inequalities.
///
/// `p` stores both triangles of a symmetric PSD matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Qcqp {
    pub n: usize,
    pub p: CsrMatrix,
    pub c: Vec<f64>,
    pub c0: f64,
    pub a_ineq: CsrMatrix,
    pub b_ineq: Vec<f64>,
    pub a_eq: CsrMatrix,
    pub b_eq: Vec<f64>,
    pub quad: Vec<RankOneConstraint>,
}

impl Qcqp {
    /// Unconstrained problem with the given objective.
    pub fn new(p: CsrMatrix, c: Vec<f64>, c0: f64) -> Self {
        let n = c.len();
        Qcqp {
            n,
            p,
            c,
            c0,
            a_ineq: CsrMatrix::zeros(0, n),
            b_ineq: Vec::new(),
            a_eq: CsrMatrix::zeros(0, n),
            b_eq: Vec::new(),
            quad: Vec::new(),
        }
    }

    pub fn with_inequalities(mut self, a: CsrMatrix, b: Vec<f64>) -> Self {
        self.a_ineq = a;
        self.b_ineq = b;
        self
    }

    pub fn with_equalities(mut self, a: CsrMatrix, b: Vec<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_quadratic(mut self, q: Vec<RankOneConstraint>) -> Self {
        self.quad = q;
        self
    }

    /// Number of inequalities (linear first, then quadratic).
    pub fn m_ineq(&self) -> usize {
        self.b_ineq.len() + self.quad.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let px = self.p.mul_vec(x);
        0.5 * dot(x, &px) + dot(&self.c, x) + self.c0
    }

    pub fn objective_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.p.mul_vec(x);
        for (gi, ci) in g.iter_mut().zip(&self.c) {
            *gi += ci;
        }
        g
    }

    /// Inequality values `g(x)` (feasible when all `<= 0`).
    pub fn inequality_values(&self, x: &[f64]) -> Vec<f64> {
        let mut v = self.a_ineq.mul_vec(x);
        for (vi, bi) in v.iter_mut().zip(&self.b_ineq) {
            *vi -= bi;
        }
        v.extend(self.quad.iter().map(|q| q.value(x)));
        v
    }

    pub fn equality_residual(&self, x: &[f64]) -> Vec<f64> {
        let mut v = self.a_eq.mul_vec(x);
        for (vi, bi) in v.iter_mut().zip(&self.b_eq) {
            *vi -= bi;
        }
        v
    }

    /// Largest constraint violation at `x` and the index of its row.
    ///
    /// Indices count linear inequalities, then quadratic ones, then equalities.
    pub fn max_violation(&self, x: &[f64]) -> (f64, usize) {
        let mut worst = (0.0, 0);
        for (k, v) in self.inequality_values(x).into_iter().enumerate() {
            if v > worst.0 {
                worst = (v, k);
            }
        }
        let off = self.m_ineq();
        for (k, v) in self.equality_residual(x).into_iter().enumerate() {
            if v.abs() > worst.0 {
                worst = (v.abs(), off + k);
            }
        }
        worst
    }

    /// Checks dimensions, finiteness, symmetry and weight signs.
    pub fn validate(&self) -> Result<(), QcqpError> {
        let n = self.n;
        let dim = |what: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(QcqpError::Dimension(what.to_string()))
            }
        };
        dim("objective matrix", self.p.nrows() == n && self.p.ncols() == n)?;
        dim("linear cost", self.c.len() == n)?;
        dim("inequality matrix", self.a_ineq.ncols() == n && self.a_ineq.nrows() == self.b_ineq.len())?;
        dim("equality matrix", self.a_eq.ncols() == n && self.a_eq.nrows() == self.b_eq.len())?;
        for q in &self.quad {
            dim("quadratic constraint", q.u.indices.iter().chain(&q.g.indices).all(|&i| i < n))?;
            if !(q.weight >= 0.0) {
                return Err(QcqpError::NonConvex("negative rank-one weight".into()));
            }
        }
        let finite = self.p.is_finite()
            && self.a_ineq.is_finite()
            && self.a_eq.is_finite()
            && self.c.iter().chain(&self.b_ineq).chain(&self.b_eq).all(|v| v.is_finite())
            && self.c0.is_finite()
            && self.quad.iter().all(|q| {
                q.weight.is_finite()
                    && q.h.is_finite()
                    && q.u.values.iter().chain(&q.g.values).all(|v| v.is_finite())
            });
        if !finite {
            return Err(QcqpError::NonFinite);
        }
        let scale = self.p.max_abs().max(1.0);
        if self.p.asymmetry() > 1e-12 * scale {
            return Err(QcqpError::NonConvex("objective matrix not symmetric".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_gradient_matches_finite_difference() {
        let q = RankOneConstraint {
            weight: 0.7,
            u: SparseVec::new(vec![0, 2], vec![1.0, -2.0]),
            g: SparseVec::new(vec![2, 3], vec![0.5, -1.0]),
            h: 0.3,
        };
        let x = [0.3, -1.0, 0.8, 2.0];
        let g = q.gradient(&x).to_dense(4);
        for i in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += 1e-6;
            xm[i] -= 1e-6;
            let fd = (q.value(&xp) - q.value(&xm)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8, "component {i}: {fd} vs {}", g[i]);
        }
    }
}
