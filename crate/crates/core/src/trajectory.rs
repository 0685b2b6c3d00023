//! Periodic load trajectories: CSV ingestion, the free cubic oscillator,
//! periodic resampling and task concatenation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discretization::build_operators;
use crate::error::{Error, Result};

/// One period of load motion sampled on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: usize,
    pub dt: f64,
    pub q_l: Vec<f64>,
    pub dq_l: Vec<f64>,
    pub ddq_l: Vec<f64>,
    pub tau_ext: Vec<f64>,
    pub label: String,
}

impl Trajectory {
    /// Builds a trajectory whose derivatives come from the periodic difference operators.
    pub fn from_positions(q_l: Vec<f64>, tau_ext: Vec<f64>, dt: f64, label: impl Into<String>) -> Result<Self> {
        if q_l.len() != tau_ext.len() {
            return Err(Error::Dimension(format!("q_l has {} samples, tau_ext {}", q_l.len(), tau_ext.len())));
        }
        let (dq_l, ddq_l) = synthesize_derivatives(&q_l, dt)?;
        let t = Trajectory { n: q_l.len(), dt, q_l, dq_l, ddq_l, tau_ext, label: label.into() };
        t.validate()?;
        Ok(t)
    }

    pub fn period(&self) -> f64 {
        self.n as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|i| i as f64 * self.dt).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::TooFewSamples { min: 4, got: self.n });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        for (name, s) in [("q_l", &self.q_l), ("dq_l", &self.dq_l), ("ddq_l", &self.ddq_l), ("tau_ext", &self.tau_ext)] {
            if s.len() != self.n {
                return Err(Error::Dimension(format!("{name} has {} samples, expected {}", s.len(), self.n)));
            }
            if let Some(row) = s.iter().position(|v| !v.is_finite()) {
                return Err(Error::NanEntry { column: name.into(), row });
            }
        }
        Ok(())
    }

    /// Relative RMS mismatch between `D q_l` and `dq_l`.
    pub fn closure_error(&self) -> f64 {
        let ops = build_operators(self.n, self.dt).expect("validated trajectory");
        let d = ops.apply_d(&self.q_l);
        let num: f64 = d.iter().zip(&self.dq_l).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = self.dq_l.iter().map(|v| v * v).sum();
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    /// Writes `time,q_l,dq_l,ddq_l,tau_ext`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// CSV text with shortest round-trip number formatting.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("time,q_l,dq_l,ddq_l,tau_ext\n");
        for i in 0..self.n {
            s.push_str(&format!(
                "{:?},{:?},{:?},{:?},{:?}\n",
                i as f64 * self.dt,
                self.q_l[i],
                self.dq_l[i],
                self.ddq_l[i],
                self.tau_ext[i]
            ));
        }
        s
    }
}

/// Velocity and acceleration from the periodic difference operators.
pub fn synthesize_derivatives(q: &[f64], dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let ops = build_operators(q.len(), dt)?;
    Ok((ops.apply_d(q), ops.apply_d2(q)))
}

/// Column names in a trajectory CSV.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub time: String,
    pub q_l: String,
    pub dq_l: Option<String>,
    pub ddq_l: Option<String>,
    pub tau_ext: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            time: "time".into(),
            q_l: "q_l".into(),
            dq_l: Some("dq_l".into()),
            ddq_l: Some("ddq_l".into()),
            tau_ext: "tau_ext".into(),
        }
    }
}

/// Loads a one-period trajectory on a uniform grid.
pub fn load_trajectory(path: impl AsRef<Path>, spec: &ColumnMap) -> Result<Trajectory> {
    load_trajectory_with(path, spec, None)
}

/// As [`load_trajectory`]; with `resample = Some(n)` non-uniform time stamps
/// are accepted and the data is interpolated onto `n` uniform points.
pub fn load_trajectory_with(path: impl AsRef<Path>, spec: &ColumnMap, resample: Option<usize>) -> Result<Trajectory> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let col = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let it = col(&spec.time)?;
    let iq = col(&spec.q_l)?;
    let itau = col(&spec.tau_ext)?;
    let idq = spec.dq_l.as_deref().and_then(find);
    let iddq = spec.ddq_l.as_deref().and_then(find);

    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 5];
    let names = [&spec.time, &spec.q_l, &spec.tau_ext];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |k: usize, name: &str| -> Result<f64> {
            let s = rec.get(k).unwrap_or("");
            let v: f64 = s.parse().map_err(|_| Error::Malformed {
                path: path.to_path_buf(),
                detail: format!("row {row}, column `{name}`: cannot parse `{s}`"),
            })?;
            if v.is_nan() {
                return Err(Error::NanEntry { column: name.to_string(), row });
            }
            Ok(v)
        };
        cols[0].push(get(it, names[0])?);
        cols[1].push(get(iq, names[1])?);
        cols[2].push(get(itau, names[2])?);
        if let Some(k) = idq {
            cols[3].push(get(k, spec.dq_l.as_deref().unwrap())?);
        }
        if let Some(k) = iddq {
            cols[4].push(get(k, spec.ddq_l.as_deref().unwrap())?);
        }
    }
    let n = cols[0].len();
    if n < 4 {
        return Err(Error::TooFewSamples { min: 4, got: n });
    }
    let time = &cols[0];
    for i in 1..n {
        if !(time[i] > time[i - 1]) {
            return Err(Error::NonMonotoneTime(i));
        }
    }
    let dt = (time[n - 1] - time[0]) / (n - 1) as f64;
    let uniform = (1..n).all(|i| ((time[i] - time[i - 1]) - dt).abs() <= 1e-6 * dt);
    let label = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());

    if !uniform {
        let Some(n_new) = resample else {
            let row = (1..n).find(|&i| ((time[i] - time[i - 1]) - dt).abs() > 1e-6 * dt).unwrap();
            return Err(Error::NonUniformTime { row, step: time[row] - time[row - 1], expected: dt });
        };
        if n_new < 4 {
            return Err(Error::TooFewSamples { min: 4, got: n_new });
        }
        let period = time[n - 1] - time[0] + dt;
        let rel: Vec<f64> = time.iter().map(|t| t - time[0]).collect();
        let q = PeriodicSpline::new(&rel, &cols[1], period).sample_uniform(n_new);
        let tau = PeriodicSpline::new(&rel, &cols[2], period).sample_uniform(n_new);
        return Trajectory::from_positions(q, tau, period / n_new as f64, label);
    }

    let q_l = cols[1].clone();
    let (dq_syn, ddq_syn) = synthesize_derivatives(&q_l, dt)?;
    let dq_l = if idq.is_some() { cols[3].clone() } else { dq_syn };
    let ddq_l = if iddq.is_some() { cols[4].clone() } else { ddq_syn };
    let traj = Trajectory { n, dt, q_l, dq_l, ddq_l, tau_ext: cols[2].clone(), label };
    traj.validate()?;
    match resample {
        Some(n_new) if n_new != n => resample_periodic(&traj, n_new),
        _ => Ok(traj),
    }
}

/// Interpolating cubic spline with periodic end conditions.
#[derive(Clone, Debug)]
pub struct PeriodicSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    period: f64,
}

impl PeriodicSpline {
    /// Knots `t` (strictly increasing, within one period starting at `t[0]`).
    pub fn new(t: &[f64], y: &[f64], period: f64) -> Self {
        let n = t.len();
        assert!(n >= 3 && y.len() == n);
        let h: Vec<f64> = (0..n)
            .map(|i| if i + 1 < n { t[i + 1] - t[i] } else { t[0] + period - t[n - 1] })
            .collect();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let ip = (i + n - 1) % n;
            let inx = (i + 1) % n;
            a[i] = h[ip];
            b[i] = 2.0 * (h[ip] + h[i]);
            c[i] = h[i];
            rhs[i] = 6.0 * ((y[inx] - y[i]) / h[i] - (y[i] - y[ip]) / h[ip]);
        }
        let m = solve_cyclic_tridiagonal(&a, &b, &c, &rhs);
        PeriodicSpline { t: t.to_vec(), y: y.to_vec(), m, period }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.t.len();
        let t0 = self.t[0];
        let u = (x - t0).rem_euclid(self.period) + t0;
        let i = match self.t.binary_search_by(|v| v.partial_cmp(&u).unwrap()) {
            Ok(k) => return self.y[k],
            Err(k) => k - 1,
        };
        let inx = (i + 1) % n;
        let tn = if i + 1 < n { self.t[i + 1] } else { t0 + self.period };
        let h = tn - self.t[i];
        let a = (tn - u) / h;
        let b = (u - self.t[i]) / h;
        a * self.y[i]
            + b * self.y[inx]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[inx]) * h * h / 6.0
    }

    /// Values at `k * period / n_new` offset from the first knot.
    pub fn sample_uniform(&self, n_new: usize) -> Vec<f64> {
        let dt = self.period / n_new as f64;
        (0..n_new).map(|k| self.eval(self.t[0] + k as f64 * dt)).collect()
    }
}

/// Solves a cyclic tridiagonal system (Sherman–Morrison).
///
/// Row `i` reads `a[i] x[i-1] + b[i] x[i] + c[i] x[i+1] = d[i]` with wrap.
fn solve_cyclic_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let gamma = -b[0];
    let mut bb = b.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= c[n - 1] * a[0] / gamma;
    let x = solve_tridiagonal(a, &bb, c, d);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = c[n - 1];
    let z = solve_tridiagonal(a, &bb, c, &u);
    let fact = (x[0] + a[0] * x[n - 1] / gamma) / (1.0 + z[0] + a[0] * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Resamples one period onto `n_new` uniform points with a periodic cubic
/// spline; derivatives are re-synthesized on the new grid.
pub fn resample_periodic(traj: &Trajectory, n_new: usize) -> Result<Trajectory> {
    if n_new < 4 {
        return Err(Error::TooFewSamples { min: 4, got: n_new });
    }
    traj.validate()?;
    if n_new == traj.n {
        return Ok(traj.clone());
    }
    let t = traj.times();
    let period = traj.period();
    let q = PeriodicSpline::new(&t, &traj.q_l, period).sample_uniform(n_new);
    let tau = PeriodicSpline::new(&t, &traj.tau_ext, period).sample_uniform(n_new);
    Trajectory::from_positions(q, tau, period / n_new as f64, traj.label.clone())
}

/// Concatenated task and the position mismatch at each junction.
#[derive(Clone, Debug, PartialEq)]
pub struct Concatenation {
    pub trajectory: Trajectory,
    /// Per junction (including the wrap back to the start): position jump
    /// minus the step predicted by the average velocity, in rad.
    pub gaps: Vec<f64>,
}

/// Joins repeated periodic parts in order.
///
/// Parts must share `dt` unless `common_dt` is given, in which case each part
/// is resampled to `round(T_part / common_dt)` points and placed on the
/// common grid.
pub fn concatenate_tasks(parts: &[(Trajectory, usize)], common_dt: Option<f64>) -> Result<Concatenation> {
    if parts.is_empty() || parts.iter().all(|p| p.1 == 0) {
        return Err(Error::InvalidParameter("no parts to concatenate".into()));
    }
    for (t, _) in parts {
        t.validate()?;
    }
    if parts.len() == 1 && parts[0].1 == 1 {
        return Ok(Concatenation { trajectory: parts[0].0.clone(), gaps: vec![junction_gap(&parts[0].0, &parts[0].0)] });
    }
    let dt0 = parts[0].0.dt;
    let same = parts.iter().all(|(t, _)| (t.dt - dt0).abs() <= 1e-12 * dt0);
    let (dt, pieces): (f64, Vec<Trajectory>) = if same {
        (dt0, parts.iter().map(|(t, _)| t.clone()).collect())
    } else {
        let Some(dt_c) = common_dt else {
            let other = parts.iter().find(|(t, _)| (t.dt - dt0).abs() > 1e-12 * dt0).unwrap().0.dt;
            return Err(Error::IncompatibleDt(dt0, other));
        };
        if !(dt_c > 0.0) {
            return Err(Error::InvalidParameter("common dt must be positive".into()));
        }
        let mut v = Vec::new();
        for (t, _) in parts {
            let n_new = ((t.period() / dt_c).round() as usize).max(4);
            let mut r = resample_periodic(t, n_new)?;
            r.dt = dt_c;
            v.push(r);
        }
        (dt_c, v)
    };

    let mut out = Trajectory {
        n: 0,
        dt,
        q_l: Vec::new(),
        dq_l: Vec::new(),
        ddq_l: Vec::new(),
        tau_ext: Vec::new(),
        label: String::new(),
    };
    let mut seq: Vec<&Trajectory> = Vec::new();
    let mut labels = Vec::new();
    for (piece, (_, reps)) in pieces.iter().zip(parts) {
        if *reps == 0 {
            continue;
        }
        labels.push(format!("{}x{}", piece.label, reps));
        for _ in 0..*reps {
            out.q_l.extend_from_slice(&piece.q_l);
            out.dq_l.extend_from_slice(&piece.dq_l);
            out.ddq_l.extend_from_slice(&piece.ddq_l);
            out.tau_ext.extend_from_slice(&piece.tau_ext);
            seq.push(piece);
        }
    }
    out.n = out.q_l.len();
    out.label = labels.join("+");
    let gaps = (0..seq.len()).map(|k| junction_gap(seq[k], seq[(k + 1) % seq.len()])).collect();
    Ok(Concatenation { trajectory: out, gaps })
}

fn junction_gap(prev: &Trajectory, next: &Trajectory) -> f64 {
    let a = prev.n - 1;
    let step = next.q_l[0] - prev.q_l[a];
    let predicted = 0.5 * prev.dt * (prev.dq_l[a] + next.dq_l[0]);
    (step - predicted).abs()
}

/// Single-mass free oscillator `I_l q̈ = -α q³`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicSpringSystem {
    pub alpha: f64,
    pub i_l: f64,
    pub q0: f64,
}

impl Default for CubicSpringSystem {
    fn default() -> Self {
        CubicSpringSystem { alpha: 40.0, i_l: 0.125, q0: std::f64::consts::FRAC_PI_2 }
    }
}

impl CubicSpringSystem {
    pub fn energy(&self, q: f64, v: f64) -> f64 {
        0.5 * self.i_l * v * v + 0.25 * self.alpha * q.powi(4)
    }

    fn accel(&self, q: f64) -> f64 {
        -self.alpha * q * q * q / self.i_l
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    /// `dq_l = D q_l`, `ddq_l = D2 q_l`.
    Operator,
    /// Integrator velocity and the exact acceleration `-α q³ / I_l`.
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicOptions {
    /// Internal RK4 steps per output sample (at least 8).
    pub oversample: usize,
    pub derivatives: DerivativeMode,
    pub drift_tol: f64,
    pub max_steps: usize,
}

impl Default for CubicOptions {
    fn default() -> Self {
        CubicOptions { oversample: 16, derivatives: DerivativeMode::Operator, drift_tol: 1e-6, max_steps: 50_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CubicOscillation {
    pub trajectory: Trajectory,
    pub period: f64,
    pub energy0: f64,
    /// Max relative deviation of mechanical energy over the period.
    pub energy_drift: f64,
    pub internal_steps: usize,
}

fn rk4_step(sys: &CubicSpringSystem, q: f64, v: f64, h: f64) -> (f64, f64) {
    let k1q = v;
    let k1v = sys.accel(q);
    let k2q = v + 0.5 * h * k1v;
    let k2v = sys.accel(q + 0.5 * h * k1q);
    let k3q = v + 0.5 * h * k2v;
    let k3v = sys.accel(q + 0.5 * h * k2q);
    let k4q = v + h * k3v;
    let k4v = sys.accel(q + h * k3q);
    (q + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q), v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v))
}

/// Velocity after `steps` RK4 steps of size `period / steps`.
fn end_velocity(sys: &CubicSpringSystem, period: f64, steps: usize) -> f64 {
    let h = period / steps as f64;
    let (mut q, mut v) = (sys.q0, 0.0);
    for _ in 0..steps {
        (q, v) = rk4_step(sys, q, v, h);
    }
    v
}

/// One period of the free cubic oscillation released from rest at `q0`.
pub fn generate_cubic_oscillation(sys: &CubicSpringSystem, n: usize) -> Result<CubicOscillation> {
    generate_cubic_oscillation_with(sys, n, &CubicOptions::default())
}

pub fn generate_cubic_oscillation_with(sys: &CubicSpringSystem, n: usize, opts: &CubicOptions) -> Result<CubicOscillation> {
    if !(sys.alpha > 0.0 && sys.i_l > 0.0) {
        return Err(Error::InvalidParameter("alpha and I_l must be positive".into()));
    }
    if !sys.q0.is_finite() {
        return Err(Error::InvalidParameter("q0 must be finite".into()));
    }
    if sys.q0 == 0.0 {
        return Err(Error::DegenerateOscillation);
    }
    if n < 4 {
        return Err(Error::TooFewSamples { min: 4, got: n });
    }
    if opts.oversample < 8 {
        return Err(Error::InvalidParameter("oversample must be at least 8".into()));
    }
    let steps = opts.oversample * n;
    let sgn = sys.q0.signum();

    // coarse pass: first return of the velocity zero crossing on the release side
    let omega = (sys.alpha * sys.q0 * sys.q0 / sys.i_l).sqrt();
    let h = 2.0 * std::f64::consts::PI / omega / steps as f64;
    let (mut q, mut v) = (sys.q0, 0.0);
    let mut t = 0.0;
    let mut coarse = None;
    for k in 0..opts.max_steps {
        let (qn, vn) = rk4_step(sys, q, v, h);
        if !(qn.is_finite() && vn.is_finite()) {
            return Err(Error::NonFiniteState(k));
        }
        if k > 0 && sgn * v > 0.0 && sgn * vn <= 0.0 && sgn * qn > 0.0 {
            coarse = Some(t + h * hermite_root(v, vn, sys.accel(q), sys.accel(qn), h));
            break;
        }
        (q, v) = (qn, vn);
        t += h;
    }
    let mut period = coarse.ok_or(Error::PeriodNotFound(opts.max_steps))?;

    // secant refinement on the step size so the grid closes exactly
    let mut t_prev = period * (1.0 + 1e-7);
    let mut f_prev = end_velocity(sys, t_prev, steps);
    for _ in 0..30 {
        let f = end_velocity(sys, period, steps);
        if f == f_prev {
            break;
        }
        let next = period - f * (period - t_prev) / (f - f_prev);
        t_prev = period;
        f_prev = f;
        let done = (next - period).abs() <= 1e-15 * period;
        period = next;
        if done {
            break;
        }
    }

    let h = period / steps as f64;
    let e0 = sys.energy(sys.q0, 0.0);
    let (mut q, mut v) = (sys.q0, 0.0);
    let mut q_l = Vec::with_capacity(n);
    let mut dq_a = Vec::with_capacity(n);
    let mut drift = 0.0f64;
    for k in 0..steps {
        if k % opts.oversample == 0 {
            q_l.push(q);
            dq_a.push(v);
        }
        (q, v) = rk4_step(sys, q, v, h);
        if !(q.is_finite() && v.is_finite()) {
            return Err(Error::NonFiniteState(k));
        }
        drift = drift.max((sys.energy(q, v) - e0).abs() / e0);
    }
    if drift > opts.drift_tol {
        return Err(Error::EnergyDrift { drift, tol: opts.drift_tol });
    }
    let dt = period / n as f64;
    let (dq_l, ddq_l) = match opts.derivatives {
        DerivativeMode::Operator => synthesize_derivatives(&q_l, dt)?,
        DerivativeMode::Analytic => {
            let acc = q_l.iter().map(|&q| sys.accel(q)).collect();
            (dq_a, acc)
        }
    };
    let trajectory = Trajectory { n, dt, q_l, dq_l, ddq_l, tau_ext: vec![0.0; n], label: "cubic".into() };
    Ok(CubicOscillation { trajectory, period, energy0: e0, energy_drift: drift, internal_steps: steps })
}

/// Root in `[0, 1]` of the cubic Hermite interpolant of `v` over one step.
fn hermite_root(v0: f64, v1: f64, a0: f64, a1: f64, h: f64) -> f64 {
    let p = |s: f64| {
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * v0
            + (s3 - 2.0 * s2 + s) * h * a0
            + (-2.0 * s3 + 3.0 * s2) * v1
            + (s3 - s2) * h * a1
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let flo = p(lo);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (p(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_solver_matches_dense() {
        let n = 7;
        let a: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        let b = vec![5.0; n];
        let c: Vec<f64> = (0..n).map(|i| 0.5 - 0.05 * i as f64).collect();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let d: Vec<f64> = (0..n)
            .map(|i| a[i] * x_true[(i + n - 1) % n] + b[i] * x_true[i] + c[i] * x_true[(i + 1) % n])
            .collect();
        let x = solve_cyclic_tridiagonal(&a, &b, &c, &d);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn spline_interpolates_knots() {
        let t: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| (2.0 * std::f64::consts::PI * t).sin()).collect();
        let s = PeriodicSpline::new(&t, &y, 1.0);
        for (ti, yi) in t.iter().zip(&y) {
            assert_eq!(s.eval(*ti), *yi);
        }
        assert!((s.eval(1.05) - s.eval(0.05)).abs() < 1e-14);
    }

    #[test]
    fn degenerate_release_is_rejected() {
        let sys = CubicSpringSystem { q0: 0.0, ..Default::default() };
        assert!(matches!(generate_cubic_oscillation(&sys, 64), Err(Error::DegenerateOscillation)));
    }
}
