//! Torque–elongation profiles read off an optimal motor trajectory.
//!
//! Samples are merged, checked for strict monotonicity and interpolated with
//! a shape-preserving piecewise cubic (PCHIP), so the local stiffness stays
//! positive between samples.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default merge tolerance on elongation (rad).
pub const DEFAULT_TOL_MERGE: f64 = 1e-6;

/// Where a profile came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub label: String,
    pub theta: Option<f64>,
    /// Hash of the run configuration and solver diagnostics.
    pub hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpringProfile {
    /// Elongation samples, strictly increasing (rad).
    pub delta: Vec<f64>,
    /// Torque samples, strictly increasing (N·m).
    pub tau: Vec<f64>,
    /// Interpolant slopes at the samples (N·m/rad).
    pub slopes: Vec<f64>,
    pub source: Provenance,
}

/// Interpolated value with the extrapolation flag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// Query fell outside the sampled range.
    pub extrapolated: bool,
}

/// Builds a profile from elongation and elastic-torque series.
///
/// Samples are sorted by elongation; neighbours closer than `tol_merge` in δ
/// and agreeing in τ are merged. Distinct torques at the same elongation and
/// torque decreasing with elongation are errors.
pub fn build_profile(delta: &[f64], tau: &[f64], tol_merge: f64) -> Result<SpringProfile> {
    build_profile_with(delta, tau, tol_merge, Provenance::default())
}

pub fn build_profile_with(delta: &[f64], tau: &[f64], tol_merge: f64, source: Provenance) -> Result<SpringProfile> {
    if delta.len() != tau.len() {
        return Err(Error::Dimension(format!("delta has {} samples, tau has {}", delta.len(), tau.len())));
    }
    if delta.is_empty() {
        return Err(Error::DegenerateProfile("no samples".into()));
    }
    if delta.iter().chain(tau).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite profile samples".into()));
    }
    if !(tol_merge >= 0.0) {
        return Err(Error::InvalidParameter(format!("tol_merge must be nonnegative, got {tol_merge}")));
    }
    let tau_scale = tau.iter().fold(1.0f64, |m, t| m.max(t.abs()));
    let tau_tol = 1e-6 * tau_scale;
    let d_scale = delta.iter().fold(1.0f64, |m, d| m.max(d.abs()));

    let mut order: Vec<usize> = (0..delta.len()).collect();
    order.sort_by(|&i, &j| delta[i].total_cmp(&delta[j]).then(tau[i].total_cmp(&tau[j])));

    // merge runs of near-identical samples into their mean
    let mut ds: Vec<f64> = Vec::new();
    let mut ts: Vec<f64> = Vec::new();
    let mut count: Vec<usize> = Vec::new();
    for &i in &order {
        let (d, t) = (delta[i], tau[i]);
        if let (Some(&d_last), Some(&t_last)) = (ds.last(), ts.last()) {
            let c = *count.last().unwrap() as f64;
            let (d_mean, t_mean) = (d_last / c, t_last / c);
            if d - d_mean <= tol_merge && (t - t_mean).abs() <= tau_tol {
                *ds.last_mut().unwrap() += d;
                *ts.last_mut().unwrap() += t;
                *count.last_mut().unwrap() += 1;
                continue;
            }
        }
        ds.push(d);
        ts.push(t);
        count.push(1);
    }
    for ((d, t), c) in ds.iter_mut().zip(ts.iter_mut()).zip(&count) {
        *d /= *c as f64;
        *t /= *c as f64;
    }

    for k in 1..ds.len() {
        let gap = ds[k] - ds[k - 1];
        if gap <= 1e-12 * d_scale {
            return Err(Error::ConflictingTorque { delta: ds[k], tau_a: ts[k - 1], tau_b: ts[k] });
        }
        if ts[k] <= ts[k - 1] {
            return Err(Error::NonMonotoneProfile {
                delta: ds[k],
                detail: format!("torque {} after {} over an elongation step of {gap:e} rad", ts[k], ts[k - 1]),
            });
        }
    }
    if ds.len() < 2 || ds[ds.len() - 1] - ds[0] <= tol_merge {
        return Err(Error::DegenerateProfile(format!(
            "elongation range {:e} rad within merge tolerance (rigid solution?)",
            ds[ds.len() - 1] - ds[0]
        )));
    }
    let slopes = pchip_slopes(&ds, &ts);
    Ok(SpringProfile { delta: ds, tau: ts, slopes, source })
}

/// Fritsch–Butland interior slopes with secant end slopes.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = (0..n - 1).map(|k| x[k + 1] - x[k]).collect();
    let s: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut m = vec![0.0; n];
    m[0] = s[0];
    m[n - 1] = s[n - 2];
    for k in 1..n - 1 {
        let (s0, s1) = (s[k - 1], s[k]);
        if s0 * s1 <= 0.0 {
            m[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / s0 + w2 / s1);
        }
    }
    m
}

impl SpringProfile {
    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.delta[0], self.delta[self.len() - 1])
    }

    /// Interval `k` with `delta[k] <= x <= delta[k + 1]`.
    fn interval(&self, x: f64) -> usize {
        let k = self.delta.partition_point(|&d| d <= x);
        k.saturating_sub(1).min(self.len() - 2)
    }

    /// Torque at elongation `x`; linear at boundary stiffness outside the range.
    pub fn evaluate(&self, x: f64) -> Evaluation {
        let n = self.len();
        let (lo, hi) = self.range();
        if x < lo {
            return Evaluation { value: self.tau[0] + self.slopes[0] * (x - lo), extrapolated: true };
        }
        if x > hi {
            return Evaluation { value: self.tau[n - 1] + self.slopes[n - 1] * (x - hi), extrapolated: true };
        }
        let k = self.interval(x);
        let h = self.delta[k + 1] - self.delta[k];
        let t = (x - self.delta[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * self.tau[k]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[k]
            + (-2.0 * t3 + 3.0 * t2) * self.tau[k + 1]
            + (t3 - t2) * h * self.slopes[k + 1];
        Evaluation { value, extrapolated: false }
    }

    /// Local stiffness `dτ/dδ` at `x`.
    pub fn stiffness(&self, x: f64) -> Evaluation {
        let n = self.len();
        let (lo, hi) = self.range();
        if x < lo {
            return Evaluation { value: self.slopes[0], extrapolated: true };
        }
        if x > hi {
            return Evaluation { value: self.slopes[n - 1], extrapolated: true };
        }
        let k = self.interval(x);
        let h = self.delta[k + 1] - self.delta[k];
        let t = (x - self.delta[k]) / h;
        let t2 = t * t;
        let value = (6.0 * t2 - 6.0 * t) / h * self.tau[k]
            + (3.0 * t2 - 4.0 * t + 1.0) * self.slopes[k]
            + (-6.0 * t2 + 6.0 * t) / h * self.tau[k + 1]
            + (3.0 * t2 - 2.0 * t) * self.slopes[k + 1];
        Evaluation { value, extrapolated: false }
    }

    /// Elastic energy `∫ τ dδ` from `a` to `b` along the interpolant.
    pub fn work(&self, a: f64, b: f64) -> f64 {
        // exact for cubics: Simpson per interval piece
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mut knots = vec![lo];
        knots.extend(self.delta.iter().copied().filter(|&d| d > lo && d < hi));
        knots.push(hi);
        let mut w = 0.0;
        for pair in knots.windows(2) {
            let (x0, x1) = (pair[0], pair[1]);
            let xm = 0.5 * (x0 + x1);
            let f = |x: f64| self.evaluate(x).value;
            w += (x1 - x0) / 6.0 * (f(x0) + 4.0 * f(xm) + f(x1));
        }
        if a <= b {
            w
        } else {
            -w
        }
    }

    /// Least-squares coefficient `c` of `τ ≈ c δ³` over the samples.
    pub fn cubic_coefficient(&self) -> f64 {
        let num: f64 = self.delta.iter().zip(&self.tau).map(|(d, t)| d.powi(3) * t).sum();
        let den: f64 = self.delta.iter().map(|d| d.powi(6)).sum();
        num / den
    }

    /// Writes `delta,tau` rows under a `#` provenance header.
    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# label: {}", self.source.label);
        if let Some(theta) = self.source.theta {
            let _ = writeln!(s, "# theta: {theta:?}");
        }
        let _ = writeln!(s, "# hash: {}", self.source.hash);
        s.push_str("delta,tau\n");
        for (d, t) in self.delta.iter().zip(&self.tau) {
            // shortest round-trip representation
            let _ = writeln!(s, "{d:?},{t:?}");
        }
        s
    }
}

pub fn export_profile(profile: &SpringProfile, path: impl AsRef<Path>) -> Result<()> {
    profile.export(path)
}

/// Reads a profile written by [`export_profile`]; samples are taken verbatim.
pub fn import_profile(path: impl AsRef<Path>) -> Result<SpringProfile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_profile(&text).map_err(|detail| Error::Malformed { path: path.to_path_buf(), detail })
}

fn parse_profile(text: &str) -> std::result::Result<SpringProfile, String> {
    let mut source = Provenance::default();
    let mut delta = Vec::new();
    let mut tau = Vec::new();
    let mut header = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            let c = c.trim();
            if let Some(v) = c.strip_prefix("label:") {
                source.label = v.trim().to_string();
            } else if let Some(v) = c.strip_prefix("theta:") {
                source.theta = Some(v.trim().parse().map_err(|_| format!("line {}: bad theta", lineno + 1))?);
            } else if let Some(v) = c.strip_prefix("hash:") {
                source.hash = v.trim().to_string();
            }
            continue;
        }
        if !header {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["delta", "tau"] {
                return Err(format!("line {}: expected header `delta,tau`", lineno + 1));
            }
            header = true;
            continue;
        }
        let mut it = line.split(',');
        let mut next = |name: &str| -> std::result::Result<f64, String> {
            let v = it.next().ok_or_else(|| format!("line {}: missing {name}", lineno + 1))?;
            let v: f64 = v.trim().parse().map_err(|_| format!("line {}: bad {name} `{v}`", lineno + 1))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("line {}: non-finite {name}", lineno + 1))
            }
        };
        delta.push(next("delta")?);
        tau.push(next("tau")?);
    }
    if !header || delta.len() < 2 {
        return Err("no samples".into());
    }
    for k in 1..delta.len() {
        if !(delta[k] > delta[k - 1] && tau[k] > tau[k - 1]) {
            return Err(format!("row {}: samples not strictly increasing", k + 1));
        }
    }
    let slopes = pchip_slopes(&delta, &tau);
    Ok(SpringProfile { delta, tau, slopes, source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_collapse() {
        let p = build_profile(&[0.0, 0.1, 0.1, 0.2], &[0.0, 1.0, 1.0, 2.0], 1e-6).unwrap();
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn conflicting_torque_is_an_error() {
        let e = build_profile(&[0.0, 0.1, 0.1, 0.2], &[0.0, 1.0, 1.5, 2.0], 1e-6).unwrap_err();
        assert!(matches!(e, Error::ConflictingTorque { .. }), "{e}");
    }

    #[test]
    fn decreasing_torque_is_an_error() {
        let e = build_profile(&[0.0, 0.1, 0.2], &[0.0, 1.0, 0.5], 1e-6).unwrap_err();
        assert!(matches!(e, Error::NonMonotoneProfile { .. }));
    }

    #[test]
    fn slopes_flat_at_extremum_in_data() {
        let m = pchip_slopes(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]);
        assert_eq!(m[1], 0.0);
    }

    #[test]
    fn parse_rejects_wrong_header() {
        assert!(parse_profile("a,b\n0,0\n1,1\n").is_err());
    }
}
