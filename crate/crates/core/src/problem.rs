//! Cost terms, constraint systems and the scalarized energy/peak-power program.

use seaspring_qcqp::{CsrMatrix, Qcqp, RankOneConstraint, SparseVec};
use serde::{Deserialize, Serialize};

use crate::discretization::{elastic_torque, DiffOperators, LoadModel, MotorParams};
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Which dissipation terms enter the energy cost.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostSelection {
    #[default]
    Total,
    JouleOnly,
    ViscousOnly,
}

/// `E_m(q) = qᵀQ_e q + A_e q + c_e` with `τ_m / k_m = F q + c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyCost {
    pub q_e: CsrMatrix,
    pub a_e: Vec<f64>,
    pub c_e: f64,
    pub f: CsrMatrix,
    pub c: Vec<f64>,
    pub selection: CostSelection,
}

impl EnergyCost {
    pub fn evaluate(&self, q: &[f64]) -> f64 {
        let qq = self.q_e.mul_vec(q);
        dot(q, &qq) + dot(&self.a_e, q) + self.c_e
    }

    /// `2 Q_e q + A_eᵀ`.
    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let mut g = self.q_e.mul_vec(q);
        for (gi, ai) in g.iter_mut().zip(&self.a_e) {
            *gi = 2.0 * *gi + ai;
        }
        g
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn assemble_energy_cost(traj: &Trajectory, load: &LoadModel, p: &MotorParams, ops: &DiffOperators) -> Result<EnergyCost> {
    assemble_energy_cost_with(traj, load, p, ops, CostSelection::Total)
}

pub fn assemble_energy_cost_with(
    traj: &Trajectory,
    load: &LoadModel,
    p: &MotorParams,
    ops: &DiffOperators,
    selection: CostSelection,
) -> Result<EnergyCost> {
    check_grid(traj, ops)?;
    p.validate()?;
    let tau = elastic_torque(traj, load);
    let dt = ops.dt;
    let f = ops.motor_operator(p.i_m, p.b_m).scaled(1.0 / p.k_m);
    let c: Vec<f64> = tau.iter().map(|t| -t / (p.eta * p.k_m * p.r)).collect();
    let joule_q = f.transpose().matmul(&f);
    let visc_q = ops.d.transpose().matmul(&ops.d).scaled(p.b_m);
    let load_term = -dot(&tau, &traj.dq_l) / p.eta;
    let ftc = f.tr_mul_vec(&c);
    let joule_a: Vec<f64> = ftc.iter().map(|v| 2.0 * v * dt).collect();
    let joule_c = dot(&c, &c) * dt;
    let n = ops.n;
    let (q_e, a_e, c_e) = match selection {
        CostSelection::Total => (joule_q.add(dt, &visc_q, dt), joule_a, joule_c + load_term * dt),
        CostSelection::JouleOnly => (joule_q.scaled(dt), joule_a, joule_c),
        CostSelection::ViscousOnly => (visc_q.scaled(dt), vec![0.0; n], 0.0),
    };
    Ok(EnergyCost { q_e, a_e, c_e, f, c, selection })
}

fn check_grid(traj: &Trajectory, ops: &DiffOperators) -> Result<()> {
    traj.validate()?;
    if traj.n != ops.n || (traj.dt - ops.dt).abs() > 1e-12 * ops.dt {
        return Err(Error::Dimension(format!(
            "trajectory grid ({}, {}) does not match operators ({}, {})",
            traj.n, traj.dt, ops.n, ops.dt
        )));
    }
    Ok(())
}

/// Per-sample motor power `p_i(q) = qᵀG_i q + H_i q`, stored by rows of `D` and `D2`.
///
/// `G_i = I_m D2_iᵀ D_i + b_m D_iᵀ D_i`, `H_i = -τ_i D_i / (η r)` and the
/// convex surrogate `G_cvx,i = b_m D_iᵀ D_i` keeps only the friction part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTerms {
    pub tau_ela: Vec<f64>,
    pub d: CsrMatrix,
    pub d2: CsrMatrix,
    pub i_m: f64,
    pub b_m: f64,
    pub eta_r: f64,
}

impl PowerTerms {
    pub fn n(&self) -> usize {
        self.tau_ela.len()
    }

    fn drow(&self, i: usize) -> SparseVec {
        let (c, v) = self.d.row(i);
        SparseVec::new(c.to_vec(), v.to_vec())
    }

    /// Factor `√b_m D_i` with `G_cvx,i = vᵀv`.
    pub fn cvx_factor(&self, i: usize) -> SparseVec {
        self.drow(i).scaled(self.b_m.sqrt())
    }

    pub fn h_row(&self, i: usize) -> SparseVec {
        self.drow(i).scaled(-self.tau_ela[i] / self.eta_r)
    }

    /// Dense `G_i` (non-symmetric as written); only for checks at small n.
    pub fn g_matrix(&self, i: usize) -> CsrMatrix {
        let n = self.n();
        let (dc, dv) = self.d.row(i);
        let (ac, av) = self.d2.row(i);
        let mut t = Vec::new();
        for (&j, &a) in ac.iter().zip(av) {
            for (&k, &b) in dc.iter().zip(dv) {
                t.push((j, k, self.i_m * a * b));
            }
        }
        for (&j, &a) in dc.iter().zip(dv) {
            for (&k, &b) in dc.iter().zip(dv) {
                t.push((j, k, self.b_m * a * b));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    pub fn g_cvx_matrix(&self, i: usize) -> CsrMatrix {
        let f = self.cvx_factor(i);
        let n = self.n();
        let mut t = Vec::new();
        for (&j, &a) in f.indices.iter().zip(&f.values) {
            for (&k, &b) in f.indices.iter().zip(&f.values) {
                t.push((j, k, a * b));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    pub fn power(&self, q: &[f64], i: usize) -> f64 {
        let (dc, dv) = self.d.row(i);
        let (ac, av) = self.d2.row(i);
        let vel: f64 = dc.iter().zip(dv).map(|(&j, &v)| v * q[j]).sum();
        let acc: f64 = ac.iter().zip(av).map(|(&j, &v)| v * q[j]).sum();
        (self.i_m * acc + self.b_m * vel) * vel - self.tau_ela[i] / self.eta_r * vel
    }

    pub fn power_cvx(&self, q: &[f64], i: usize) -> f64 {
        let vel = self.drow(i).dot(q);
        self.b_m * vel * vel - self.tau_ela[i] / self.eta_r * vel
    }

    pub fn max_power_cvx(&self, q: &[f64]) -> f64 {
        (0..self.n()).map(|i| self.power_cvx(q, i)).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn assemble_power_terms(tau_ela: &[f64], p: &MotorParams, ops: &DiffOperators) -> Result<PowerTerms> {
    if tau_ela.len() != ops.n {
        return Err(Error::Dimension(format!("tau_ela has {} samples, grid {}", tau_ela.len(), ops.n)));
    }
    Ok(PowerTerms {
        tau_ela: tau_ela.to_vec(),
        d: ops.d.clone(),
        d2: ops.d2.clone(),
        i_m: p.i_m,
        b_m: p.b_m,
        eta_r: p.eta * p.r,
    })
}

/// How the strictly increasing spring characteristic is imposed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonotonicityMode {
    /// Consecutive time samples: `Δδ_i` has the sign of `Δτ_i`, with wrap.
    TimeAdjacent,
    /// Consecutive samples in ascending torque: `δ` increases along the
    /// sorted chain, which also makes the spring single-valued.
    #[default]
    TorqueOrdered,
}

/// Monotonicity rows: `A1 q <= b1 - eps_strict`, `A2 q = b2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monotonicity {
    pub a1: CsrMatrix,
    pub b1: Vec<f64>,
    pub a2: CsrMatrix,
    pub b2: Vec<f64>,
    pub eps_strict: f64,
}

impl Monotonicity {
    /// Smallest margin `b1 - eps - A1 q` over the strict rows (negative when violated).
    pub fn margin(&self, q: &[f64]) -> f64 {
        self.a1
            .mul_vec(q)
            .iter()
            .zip(&self.b1)
            .map(|(a, b)| b - self.eps_strict - a)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Time-adjacent rows with wrap from sample 1 to sample n.
pub fn assemble_monotonicity(tau_ela: &[f64], q_l: &[f64], r: f64, eps_strict: f64) -> Result<Monotonicity> {
    assemble_monotonicity_with(tau_ela, q_l, r, eps_strict, MonotonicityMode::TimeAdjacent)
}

pub fn assemble_monotonicity_with(
    tau_ela: &[f64],
    q_l: &[f64],
    r: f64,
    eps_strict: f64,
    mode: MonotonicityMode,
) -> Result<Monotonicity> {
    let n = tau_ela.len();
    if q_l.len() != n {
        return Err(Error::Dimension(format!("tau_ela {} vs q_l {}", n, q_l.len())));
    }
    if !(eps_strict >= 0.0) {
        return Err(Error::InvalidParameter("eps_strict must be nonnegative".into()));
    }
    // pairs (lo, hi): torque at hi is not below torque at lo
    let mut ineq: Vec<(usize, usize)> = Vec::new();
    let mut eq: Vec<(usize, usize)> = Vec::new();
    match mode {
        MonotonicityMode::TimeAdjacent => {
            for i in 0..n {
                let prev = (i + n - 1) % n;
                let dtau = tau_ela[i] - tau_ela[prev];
                if dtau > 0.0 {
                    ineq.push((prev, i));
                } else if dtau < 0.0 {
                    ineq.push((i, prev));
                } else {
                    eq.push((prev, i));
                }
            }
        }
        MonotonicityMode::TorqueOrdered => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| tau_ela[a].total_cmp(&tau_ela[b]).then(a.cmp(&b)));
            let scale = tau_ela.iter().fold(0.0f64, |m, t| m.max(t.abs()));
            let tie = 1e-9 * scale;
            for w in order.windows(2) {
                if tau_ela[w[1]] - tau_ela[w[0]] <= tie {
                    eq.push((w[0], w[1]));
                } else {
                    ineq.push((w[0], w[1]));
                }
            }
        }
    }
    // δ_hi - δ_lo >= eps  <=>  (q_hi - q_lo)/r <= q_l,hi - q_l,lo - eps
    let mut t1 = Vec::new();
    let mut b1 = Vec::new();
    for (k, &(lo, hi)) in ineq.iter().enumerate() {
        t1.push((k, hi, 1.0 / r));
        t1.push((k, lo, -1.0 / r));
        b1.push(q_l[hi] - q_l[lo]);
    }
    let mut t2 = Vec::new();
    let mut b2 = Vec::new();
    for (k, &(lo, hi)) in eq.iter().enumerate() {
        t2.push((k, hi, 1.0 / r));
        t2.push((k, lo, -1.0 / r));
        b2.push(q_l[hi] - q_l[lo]);
    }
    Ok(Monotonicity {
        a1: CsrMatrix::from_triplets(ineq.len(), n, &t1),
        b1,
        a2: CsrMatrix::from_triplets(eq.len(), n, &t2),
        b2,
        eps_strict,
    })
}

/// Default strictness margin `1e-8 r max|Δq_l|`.
pub fn default_eps_strict(q_l: &[f64], r: f64) -> f64 {
    let n = q_l.len();
    let m = (0..n).map(|i| (q_l[i] - q_l[(i + n - 1) % n]).abs()).fold(0.0, f64::max);
    1e-8 * r * m
}

/// Which actuator limits to impose. `None` omits the rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub tau_max: Option<f64>,
    pub dq_max: Option<f64>,
    pub delta_max: Option<f64>,
}

impl Limits {
    pub fn none() -> Self {
        Limits::default()
    }

    /// Motor torque and speed limits from `p`, plus an optional elongation bound.
    pub fn from_motor(p: &MotorParams, delta_max: Option<f64>) -> Self {
        Limits { tau_max: Some(p.tau_max), dq_max: Some(p.dq_max), delta_max }
    }

    pub fn is_empty(&self) -> bool {
        self.tau_max.is_none() && self.dq_max.is_none() && self.delta_max.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    Torque,
    Speed,
    Elongation,
}

/// Affine rows `A q <= b` for bilateral actuator limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitRows {
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    pub kinds: Vec<LimitKind>,
}

pub fn assemble_actuator_limits(
    traj: &Trajectory,
    load: &LoadModel,
    p: &MotorParams,
    ops: &DiffOperators,
    limits: &Limits,
) -> Result<LimitRows> {
    check_grid(traj, ops)?;
    for (name, v) in [("tau_max", limits.tau_max), ("dq_max", limits.dq_max), ("delta_max", limits.delta_max)] {
        if let Some(v) = v {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
    }
    let n = ops.n;
    let tau = elastic_torque(traj, load);
    let er = p.eta * p.r;
    let mut t = Vec::new();
    let mut b = Vec::new();
    let mut kinds = Vec::new();
    let mut push_row = |t: &mut Vec<(usize, usize, f64)>, cols: &[usize], vals: &[f64], sign: f64, rhs: f64, kind| {
        let k = b.len();
        for (&j, &v) in cols.iter().zip(vals) {
            t.push((k, j, sign * v));
        }
        b.push(rhs);
        kinds.push(kind);
    };
    if let Some(tm) = limits.tau_max {
        let m = ops.motor_operator(p.i_m, p.b_m);
        for (i, ti) in tau.iter().enumerate() {
            let (c, v) = m.row(i);
            let off = ti / er;
            push_row(&mut t, c, v, 1.0, tm + off, LimitKind::Torque);
            push_row(&mut t, c, v, -1.0, tm - off, LimitKind::Torque);
        }
    }
    if let Some(vm) = limits.dq_max {
        for i in 0..n {
            let (c, v) = ops.d.row(i);
            push_row(&mut t, c, v, 1.0, vm, LimitKind::Speed);
            push_row(&mut t, c, v, -1.0, vm, LimitKind::Speed);
        }
    }
    if let Some(dm) = limits.delta_max {
        let inv_r = 1.0 / p.r;
        for i in 0..n {
            // δ = q_l - q/r
            push_row(&mut t, &[i], &[inv_r], -1.0, dm - traj.q_l[i], LimitKind::Elongation);
            push_row(&mut t, &[i], &[inv_r], 1.0, dm + traj.q_l[i], LimitKind::Elongation);
        }
    }
    Ok(LimitRows { a: CsrMatrix::from_triplets(b.len(), n, &t), b, kinds })
}

/// All constraints on the motor trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    pub a1: CsrMatrix,
    pub b1: Vec<f64>,
    pub a2: CsrMatrix,
    pub b2: Vec<f64>,
    pub eps_strict: f64,
    pub limits: LimitRows,
    pub mode: MonotonicityMode,
    /// Fixes the shift invariance of the cost with `mean(δ) = 0` when no
    /// elongation limit is present.
    pub gauge: bool,
    pub r: f64,
    pub q_l_mean: f64,
}

/// Options for [`assemble_constraints`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintOptions {
    pub limits: Limits,
    pub mode: MonotonicityMode,
    /// `None` selects [`default_eps_strict`].
    pub eps_strict: Option<f64>,
}

impl Default for ConstraintOptions {
    fn default() -> Self {
        ConstraintOptions { limits: Limits::none(), mode: MonotonicityMode::default(), eps_strict: None }
    }
}

pub fn assemble_constraints(
    traj: &Trajectory,
    load: &LoadModel,
    p: &MotorParams,
    ops: &DiffOperators,
    opts: &ConstraintOptions,
) -> Result<ConstraintSystem> {
    let tau = elastic_torque(traj, load);
    let eps = opts.eps_strict.unwrap_or_else(|| default_eps_strict(&traj.q_l, p.r));
    let mono = assemble_monotonicity_with(&tau, &traj.q_l, p.r, eps, opts.mode)?;
    let limits = assemble_actuator_limits(traj, load, p, ops, &opts.limits)?;
    Ok(ConstraintSystem {
        a1: mono.a1,
        b1: mono.b1,
        a2: mono.a2,
        b2: mono.b2,
        eps_strict: eps,
        limits,
        mode: opts.mode,
        gauge: opts.limits.delta_max.is_none(),
        r: p.r,
        q_l_mean: traj.q_l.iter().sum::<f64>() / traj.n as f64,
    })
}

impl ConstraintSystem {
    /// Largest violation of the monotonicity, gauge and limit rows at `q`.
    pub fn max_violation(&self, q: &[f64]) -> f64 {
        let mut v = 0.0f64;
        for (a, b) in self.a1.mul_vec(q).iter().zip(&self.b1) {
            v = v.max(a - (b - self.eps_strict));
        }
        for (a, b) in self.a2.mul_vec(q).iter().zip(&self.b2) {
            v = v.max((a - b).abs());
        }
        for (a, b) in self.limits.a.mul_vec(q).iter().zip(&self.limits.b) {
            v = v.max(a - b);
        }
        v
    }
}

/// The scalarized program over `(q_m, s, a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub n: usize,
    pub energy: EnergyCost,
    pub power: PowerTerms,
    pub constraints: ConstraintSystem,
    pub theta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Whether the peak-power slack `s` is a decision variable.
    pub has_s: bool,
    /// Whether the peak-acceleration slack `a` is a decision variable.
    pub has_a: bool,
    /// Stiff-spring starting point for `q_m`.
    pub seed: Vec<f64>,
}

pub const DEFAULT_GAMMA1: f64 = 0.02;
pub const DEFAULT_GAMMA2: f64 = 300.0;

pub fn build_problem(
    costs: EnergyCost,
    terms: PowerTerms,
    constraints: ConstraintSystem,
    theta: f64,
    gamma1: f64,
    gamma2: f64,
    q_l: &[f64],
) -> Result<ProblemInstance> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta must lie in [0, 1], got {theta}")));
    }
    if !(gamma1 >= 0.0 && gamma2 >= 0.0 && gamma1.is_finite() && gamma2.is_finite()) {
        return Err(Error::InvalidParameter("gamma1 and gamma2 must be nonnegative".into()));
    }
    let n = terms.n();
    if q_l.len() != n || costs.a_e.len() != n {
        return Err(Error::Dimension("problem parts disagree on n".into()));
    }
    let seed = stiff_seed(q_l, &terms.tau_ela, constraints.r);
    Ok(ProblemInstance {
        n,
        energy: costs,
        power: terms,
        constraints,
        theta,
        gamma1,
        gamma2,
        has_s: theta < 1.0,
        has_a: (1.0 - theta) * gamma1 > 0.0,
        seed,
    })
}

/// `q_m = r q_l - r τ / k0` for a stiff linear spring, shifted to `mean(δ) = 0`.
pub fn stiff_seed(q_l: &[f64], tau: &[f64], r: f64) -> Vec<f64> {
    let n = q_l.len();
    let tmax = tau.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let span = q_l.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - q_l.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let delta: Vec<f64> = if tmax > 0.0 {
        let k0 = tmax / (1e-2 * span.max(1e-3));
        tau.iter().map(|t| t / k0).collect()
    } else {
        vec![0.0; n]
    };
    let mean = delta.iter().sum::<f64>() / n as f64;
    q_l.iter().zip(&delta).map(|(l, d)| r * (l - (d - mean))).collect()
}

impl ProblemInstance {
    pub fn dim(&self) -> usize {
        self.n + usize::from(self.has_s) + usize::from(self.has_a)
    }

    pub fn s_index(&self) -> Option<usize> {
        self.has_s.then_some(self.n)
    }

    pub fn a_index(&self) -> Option<usize> {
        self.has_a.then_some(self.n + usize::from(self.has_s))
    }

    /// Peak convex power and `‖D2 q‖∞` at `q`.
    pub fn tight_slacks(&self, q: &[f64]) -> (f64, f64) {
        let s = self.power.max_power_cvx(q);
        let a = self.power.d2.mul_vec(q).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (s, a)
    }

    /// Scalar objective as a function of `q` alone (slacks at their tight values).
    pub fn objective_q(&self, q: &[f64]) -> f64 {
        let mut f = self.theta * self.gamma2 * self.energy.evaluate(q);
        if self.theta < 1.0 {
            let (s, a) = self.tight_slacks(q);
            f += (1.0 - self.theta) * (s + self.gamma1 * a);
        }
        f
    }

    /// Gradient of [`Self::objective_q`], using the active sample of each max.
    pub fn objective_q_gradient(&self, q: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = self.energy.gradient(q).iter().map(|v| self.theta * self.gamma2 * v).collect();
        if self.theta < 1.0 {
            let w = 1.0 - self.theta;
            let n = self.n;
            let i = (0..n).max_by(|&a, &b| self.power.power_cvx(q, a).total_cmp(&self.power.power_cvx(q, b))).unwrap();
            let d = self.power.cvx_factor(i);
            let h = self.power.h_row(i);
            let dq = d.dot(q);
            d.axpy_into(w * 2.0 * dq, &mut g);
            h.axpy_into(w, &mut g);
            if self.gamma1 > 0.0 {
                let acc = self.power.d2.mul_vec(q);
                let k = (0..n).max_by(|&a, &b| acc[a].abs().total_cmp(&acc[b].abs())).unwrap();
                let (c, v) = self.power.d2.row(k);
                let sgn = acc[k].signum();
                for (&j, &val) in c.iter().zip(v) {
                    g[j] += w * self.gamma1 * sgn * val;
                }
            }
        }
        g
    }

    /// Full decision vector from `q` with slacks 10% above their tight values.
    pub fn initial_point(&self, q: &[f64]) -> Vec<f64> {
        let (s, a) = self.tight_slacks(q);
        let mut x = q.to_vec();
        if self.has_s {
            x.push(s + 0.1 * s.abs().max(1e-3));
        }
        if self.has_a {
            x.push(a + 0.1 * a.abs().max(1e-3));
        }
        x
    }

    /// Lowers to the generic solver form.
    pub fn to_qcqp(&self) -> Qcqp {
        let n = self.n;
        let dim = self.dim();
        let te = self.theta * self.gamma2;
        let w = 1.0 - self.theta;
        let p = self.energy.q_e.scaled(2.0 * te);
        let p = CsrMatrix::from_triplets(dim, dim, &p.triplets());
        let mut c: Vec<f64> = self.energy.a_e.iter().map(|v| te * v).collect();
        c.resize(dim, 0.0);
        if let Some(si) = self.s_index() {
            c[si] = w;
        }
        if let Some(ai) = self.a_index() {
            c[ai] = w * self.gamma1;
        }
        let cs = &self.constraints;

        let mut ineq = Vec::new();
        let mut b = Vec::new();
        let mut push = |a: &CsrMatrix, rhs: &[f64], shift: f64| {
            let off = b.len();
            for (i, j, v) in a.triplets() {
                ineq.push((off + i, j, v));
            }
            b.extend(rhs.iter().map(|r| r - shift));
        };
        push(&cs.a1, &cs.b1, cs.eps_strict);
        push(&cs.limits.a, &cs.limits.b, 0.0);
        if let Some(ai) = self.a_index() {
            for i in 0..n {
                let (cols, vals) = self.power.d2.row(i);
                for sgn in [1.0, -1.0] {
                    let k = b.len();
                    for (&j, &v) in cols.iter().zip(vals) {
                        ineq.push((k, j, sgn * v));
                    }
                    ineq.push((k, ai, -1.0));
                    b.push(0.0);
                }
            }
        }
        let a_ineq = CsrMatrix::from_triplets(b.len(), dim, &ineq);

        let mut eq = cs.a2.triplets();
        let mut b_eq = cs.b2.clone();
        if cs.gauge {
            let k = b_eq.len();
            for j in 0..n {
                eq.push((k, j, 1.0 / n as f64));
            }
            b_eq.push(cs.r * cs.q_l_mean);
        }
        let a_eq = CsrMatrix::from_triplets(b_eq.len(), dim, &eq);

        let mut quad = Vec::new();
        if let Some(si) = self.s_index() {
            for i in 0..n {
                let (cols, vals) = self.power.d.row(i);
                let mut g = self.power.h_row(i);
                g.indices.push(si);
                g.values.push(-1.0);
                quad.push(RankOneConstraint {
                    weight: self.power.b_m,
                    u: SparseVec::new(cols.to_vec(), vals.to_vec()),
                    g,
                    h: 0.0,
                });
            }
        }
        Qcqp::new(p, c, te * self.energy.c_e)
            .with_inequalities(a_ineq, b)
            .with_equalities(a_eq, b_eq)
            .with_quadratic(quad)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Assembly settings for [`assemble_instance`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSettings {
    pub theta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub cost: CostSelection,
    pub constraints: ConstraintOptions,
}

impl Default for DesignSettings {
    fn default() -> Self {
        DesignSettings {
            theta: 1.0,
            gamma1: DEFAULT_GAMMA1,
            gamma2: DEFAULT_GAMMA2,
            cost: CostSelection::Total,
            constraints: ConstraintOptions::default(),
        }
    }
}

/// Assembles every piece of the program for one trajectory.
pub fn assemble_instance(
    traj: &Trajectory,
    load: &LoadModel,
    p: &MotorParams,
    ops: &DiffOperators,
    settings: &DesignSettings,
) -> Result<ProblemInstance> {
    let costs = assemble_energy_cost_with(traj, load, p, ops, settings.cost)?;
    let tau = elastic_torque(traj, load);
    let terms = assemble_power_terms(&tau, p, ops)?;
    let cons = assemble_constraints(traj, load, p, ops, &settings.constraints)?;
    build_problem(costs, terms, cons, settings.theta, settings.gamma1, settings.gamma2, &traj.q_l)
}
