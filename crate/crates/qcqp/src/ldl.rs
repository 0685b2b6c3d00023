//! Envelope (skyline) LDLᵀ factorization of symmetric quasi-definite matrices.
//!
//! No pivoting is performed. Each pivot has an expected sign; a pivot that
//! comes out with the wrong sign or too close to zero is replaced by a small
//! signed value (dynamic regularization) and counted.

use crate::ordering::invert;
use crate::sparse::CsrMatrix;

#[derive(Clone, Debug)]
pub struct SkylineLdl {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    l: Vec<f64>,
    d: Vec<f64>,
    /// Number of pivots replaced during factorization.
    pub dynamic_pivots: usize,
}

/// Pivot replacement policy.
#[derive(Clone, Copy, Debug)]
pub struct DynamicReg {
    /// Pivots with `sign * d < threshold` are replaced.
    pub threshold: f64,
    /// Replacement magnitude.
    pub delta: f64,
}

impl Default for DynamicReg {
    fn default() -> Self {
        DynamicReg { threshold: 1e-13, delta: 1e-8 }
    }
}

impl SkylineLdl {
    /// Factors `P A Pᵀ = L D Lᵀ`.
    ///
    /// `a` holds the full symmetric matrix (both triangles) in original
    /// ordering; only the lower triangle under `perm` is read. `signs[i]` is
    /// the expected pivot sign of original row `i`.
    pub fn factor(a: &CsrMatrix, perm: &[usize], signs: &[i8], reg: DynamicReg) -> Self {
        let n = a.nrows();
        assert_eq!(perm.len(), n);
        assert_eq!(signs.len(), n);
        let inv = invert(perm);

        let mut first: Vec<usize> = (0..n).collect();
        for i in 0..n {
            let pi = inv[i];
            for &j in a.row(i).0 {
                let pj = inv[j];
                if pj < pi {
                    first[pi] = first[pi].min(pj);
                }
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i]);
        }
        let mut l = vec![0.0; start[n]];
        let mut d = vec![0.0; n];
        for i in 0..n {
            let pi = inv[i];
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let pj = inv[j];
                if pj < pi {
                    l[start[pi] + pj - first[pi]] += v;
                } else if pj == pi {
                    d[pi] += v;
                }
            }
        }

        let mut dynamic_pivots = 0;
        for i in 0..n {
            let fi = first[i];
            let (prev, rest) = l.split_at_mut(start[i]);
            let row = &mut rest[..i - fi];
            // row[k - fi] holds a_ik and is overwritten by v_k = l_ik d_k
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let lj = &prev[start[j]..start[j] + (j - fj)];
                let mut s = row[j - fi];
                for k in k0..j {
                    s -= row[k - fi] * lj[k - fj];
                }
                row[j - fi] = s;
            }
            let mut di = d[i];
            for k in fi..i {
                let v = row[k - fi];
                let lik = v / d[k];
                di -= v * lik;
                row[k - fi] = lik;
            }
            let sgn = f64::from(signs[perm[i]]);
            if !(sgn * di > reg.threshold) {
                di = sgn * reg.delta;
                dynamic_pivots += 1;
            }
            d[i] = di;
        }
        SkylineLdl { n, perm: perm.to_vec(), first, start, l, d, dynamic_pivots }
    }

    /// Solves `A x = b` with the factored matrix.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.l[self.start[i]..self.start[i + 1]];
            let mut s = y[i];
            for (k, lik) in (fi..i).zip(row) {
                s -= lik * y[k];
            }
            y[i] = s;
        }
        for (yi, di) in y.iter_mut().zip(&self.d) {
            *yi /= di;
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.l[self.start[i]..self.start[i + 1]];
            let xi = y[i];
            for (k, lik) in (fi..i).zip(row) {
                y[k] -= lik * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    /// Pivots in factored order.
    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    /// Stored envelope size (strictly lower part).
    pub fn envelope_size(&self) -> usize {
        self.l.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordering::rcm;

    #[test]
    fn solves_spd_tridiagonal() {
        let n = 20;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&x);
        let f = SkylineLdl::factor(&a, &rcm(&a), &vec![1; n], DynamicReg::default());
        let got = f.solve(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-12);
        }
        assert_eq!(f.dynamic_pivots, 0);
    }

    #[test]
    fn solves_quasi_definite_saddle() {
        // [[2 1 1],[1 3 0],[1 0 -1]]
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0, 1.0], vec![1.0, 3.0, 0.0], vec![1.0, 0.0, -1.0]]);
        let b = vec![1.0, 2.0, 3.0];
        let f = SkylineLdl::factor(&a, &[0, 1, 2], &[1, 1, -1], DynamicReg::default());
        let x = f.solve(&b);
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }
}
