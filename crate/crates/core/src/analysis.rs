//! Energy and power metrics, rigid and linear-spring baselines, and the
//! θ-sweep trade-off curve.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{elastic_torque, motor_torque, DiffOperators, LoadModel, MotorParams};
use crate::error::{Error, Result};
use crate::problem::{assemble_instance, ConstraintOptions, CostSelection, DesignSettings, Limits, DEFAULT_GAMMA1, DEFAULT_GAMMA2};
use crate::solver::{solve, SolverConfig, Status};
use crate::trajectory::Trajectory;

/// Motor energy over one period, split by mechanism (J).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub joule: f64,
    pub viscous: f64,
    /// `-Σ τ_ela dq_l Δt / η`; independent of the spring.
    pub load_mech: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    /// Joule heating plus viscous friction.
    pub fn dissipated(&self) -> f64 {
        self.joule + self.viscous
    }
}

fn check_len(q_m: &[f64], ops: &DiffOperators) -> Result<()> {
    if q_m.len() != ops.n {
        return Err(Error::Dimension(format!("q_m has {} samples, grid has {}", q_m.len(), ops.n)));
    }
    Ok(())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn energy_breakdown(
    q_m: &[f64],
    traj: &Trajectory,
    load: &LoadModel,
    p: &MotorParams,
    ops: &DiffOperators,
) -> Result<EnergyBreakdown> {
    check_len(q_m, ops)?;
    if traj.n != ops.n {
        return Err(Error::Dimension(format!("trajectory has {} samples, grid has {}", traj.n, ops.n)));
    }
    let tau = elastic_torque(traj, load);
    let tau_m = motor_torque(q_m, &tau, p, ops)?;
    let vel = ops.apply_d(q_m);
    let dt = ops.dt;
    let joule = tau_m.iter().map(|t| (t / p.k_m).powi(2)).sum::<f64>() * dt;
    let viscous = p.b_m * vel.iter().map(|v| v * v).sum::<f64>() * dt;
    let load_mech = -tau.iter().zip(&traj.dq_l).map(|(t, v)| t * v).sum::<f64>() * dt / p.eta;
    Ok(EnergyBreakdown { joule, viscous, load_mech, total: joule + viscous + load_mech })
}

/// `max_i |τ_m,i (D q_m)_i|`.
pub fn peak_power_true(q_m: &[f64], tau_ela: &[f64], p: &MotorParams, ops: &DiffOperators) -> Result<f64> {
    let tau_m = motor_torque(q_m, tau_ela, p, ops)?;
    let vel = ops.apply_d(q_m);
    Ok(tau_m.iter().zip(&vel).fold(0.0f64, |m, (t, v)| m.max((t * v).abs())))
}

/// `max_i b_m (D q_m)_i² - τ_ela,i (D q_m)_i / (η r)`; the inertia term is dropped.
pub fn peak_power_cvx(q_m: &[f64], tau_ela: &[f64], p: &MotorParams, ops: &DiffOperators) -> Result<f64> {
    check_len(q_m, ops)?;
    if tau_ela.len() != ops.n {
        return Err(Error::Dimension("tau_ela vs grid".into()));
    }
    let vel = ops.apply_d(q_m);
    let er = p.eta * p.r;
    Ok(vel.iter().zip(tau_ela).map(|(v, t)| p.b_m * v * v - t * v / er).fold(f64::NEG_INFINITY, f64::max))
}

/// Everything reported about one motor trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub breakdown: EnergyBreakdown,
    /// True peak mechanical power (W).
    pub peak_power: f64,
    /// Peak of the convex power surrogate (W).
    pub peak_power_cvx: f64,
    pub max_tau_m: f64,
    pub max_dq_m: f64,
    pub max_delta: f64,
    /// `‖D2 q_m‖∞` (rad/s²).
    pub max_acc: f64,
}

impl Metrics {
    /// Whether the torque, speed and elongation limits hold within `tol`.
    pub fn within(&self, limits: &Limits, tol: f64) -> bool {
        limits.tau_max.is_none_or(|l| self.max_tau_m <= l + tol)
            && limits.dq_max.is_none_or(|l| self.max_dq_m <= l + tol)
            && limits.delta_max.is_none_or(|l| self.max_delta <= l + tol)
    }
}

pub fn evaluate_metrics(
    q_m: &[f64],
    traj: &Trajectory,
    load: &LoadModel,
    p: &MotorParams,
    ops: &DiffOperators,
) -> Result<Metrics> {
    let breakdown = energy_breakdown(q_m, traj, load, p, ops)?;
    let tau = elastic_torque(traj, load);
    let tau_m = motor_torque(q_m, &tau, p, ops)?;
    let vel = ops.apply_d(q_m);
    let delta: Vec<f64> = traj.q_l.iter().zip(q_m).map(|(l, m)| l - m / p.r).collect();
    Ok(Metrics {
        breakdown,
        peak_power: peak_power_true(q_m, &tau, p, ops)?,
        peak_power_cvx: peak_power_cvx(q_m, &tau, p, ops)?,
        max_tau_m: max_abs(&tau_m),
        max_dq_m: max_abs(&vel),
        max_delta: max_abs(&delta),
        max_acc: max_abs(&ops.apply_d2(q_m)),
    })
}

/// Metrics of the rigid actuator `q_m = r q_l`.
pub fn rigid_baseline(traj: &Trajectory, load: &LoadModel, p: &MotorParams, ops: &DiffOperators) -> Result<Metrics> {
    let q_m: Vec<f64> = traj.q_l.iter().map(|q| p.r * q).collect();
    evaluate_metrics(&q_m, traj, load, p, ops)
}

/// What the linear-spring search minimizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LinearObjective {
    Energy,
    Peak,
    /// `θ γ₂ E + (1 - θ)(max p_cvx + γ₁ ‖D2 q‖∞)`, like the nonlinear program.
    Blend { theta: f64, gamma1: f64, gamma2: f64 },
}

impl LinearObjective {
    pub fn blend(theta: f64) -> Self {
        LinearObjective::Blend { theta, gamma1: DEFAULT_GAMMA1, gamma2: DEFAULT_GAMMA2 }
    }

    pub fn score(&self, m: &Metrics) -> f64 {
        match *self {
            LinearObjective::Energy => m.breakdown.total,
            LinearObjective::Peak => m.peak_power,
            LinearObjective::Blend { theta, gamma1, gamma2 } => {
                theta * gamma2 * m.breakdown.total + (1.0 - theta) * (m.peak_power_cvx + gamma1 * m.max_acc)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearCandidate {
    /// Spring stiffness (N·m/rad); `None` is the rigid limit.
    pub stiffness: Option<f64>,
    pub metrics: Metrics,
    pub feasible: bool,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearBaseline {
    pub objective: LinearObjective,
    /// Grid candidates followed by the rigid limit.
    pub candidates: Vec<LinearCandidate>,
    /// Best feasible candidate after refinement; `None` when nothing is feasible.
    pub best: Option<LinearCandidate>,
}

/// Motor trajectory realizing a linear spring of stiffness `k`: `q_m = r (q_l - τ/k)`.
pub fn linear_spring_motor(traj: &Trajectory, tau_ela: &[f64], r: f64, k: f64) -> Vec<f64> {
    traj.q_l.iter().zip(tau_ela).map(|(q, t)| r * (q - t / k)).collect()
}

/// Log-spaced stiffness grid spanning six decades around `max|τ| / max|q_l - mean|`.
pub fn default_stiffness_grid(traj: &Trajectory, load: &LoadModel, points: usize) -> Vec<f64> {
    let tau = elastic_torque(traj, load);
    let mean = traj.q_l.iter().sum::<f64>() / traj.n as f64;
    let amp = traj.q_l.iter().fold(0.0f64, |m, q| m.max((q - mean).abs())).max(1e-6);
    let k_ref = (max_abs(&tau) / amp).max(1e-6);
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let e = -2.0 + 6.0 * i as f64 / (points - 1) as f64;
            k_ref * 10f64.powf(e)
        })
        .collect()
}

/// Best linear series spring on `k_grid`, refined by golden-section search
/// around the best grid cell.
pub fn linear_spring_baseline(
    traj: &Trajectory,
    load: &LoadModel,
    p: &MotorParams,
    ops: &DiffOperators,
    k_grid: &[f64],
    objective: LinearObjective,
    limits: &Limits,
) -> Result<LinearBaseline> {
    if k_grid.len() < 2 || k_grid.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
        return Err(Error::InvalidParameter("stiffness grid needs at least two positive values".into()));
    }
    let (kmin, kmax) = k_grid.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &k| (a.min(k), b.max(k)));
    if kmax / kmin < 1e3 * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!("stiffness grid spans {:.2} decades, need 3", (kmax / kmin).log10())));
    }
    let tau = elastic_torque(traj, load);
    let candidate = |k: Option<f64>| -> Result<LinearCandidate> {
        let q_m = match k {
            Some(k) => linear_spring_motor(traj, &tau, p.r, k),
            None => traj.q_l.iter().map(|q| p.r * q).collect(),
        };
        let metrics = evaluate_metrics(&q_m, traj, load, p, ops)?;
        let feasible = metrics.within(limits, 1e-9);
        Ok(LinearCandidate { stiffness: k, metrics, feasible, score: objective.score(&metrics) })
    };

    let mut grid: Vec<f64> = k_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut candidates = grid.iter().map(|&k| candidate(Some(k))).collect::<Result<Vec<_>>>()?;
    candidates.push(candidate(None)?);

    let better = |a: &LinearCandidate, b: &LinearCandidate| a.score < b.score;
    let mut best: Option<LinearCandidate> = None;
    let mut best_idx = None;
    for (i, c) in candidates.iter().enumerate() {
        if c.feasible && best.as_ref().is_none_or(|b| better(c, b)) {
            best = Some(*c);
            best_idx = Some(i);
        }
    }
    if let Some(i) = best_idx.filter(|&i| i < grid.len()) {
        let lo = grid[i.saturating_sub(1)].ln();
        let hi = grid[(i + 1).min(grid.len() - 1)].ln();
        let eval = |lk: f64| -> Result<(f64, LinearCandidate)> {
            let c = candidate(Some(lk.exp()))?;
            Ok((if c.feasible { c.score } else { f64::INFINITY }, c))
        };
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo, hi);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let mut f1 = eval(x1)?;
        let mut f2 = eval(x2)?;
        for _ in 0..60 {
            if (b - a).abs() < 1e-10 {
                break;
            }
            if f1.0 <= f2.0 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = eval(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = eval(x2)?;
            }
        }
        for (_, c) in [f1, f2] {
            if c.feasible && best.as_ref().is_none_or(|b| better(&c, b)) {
                best = Some(c);
            }
        }
    }
    Ok(LinearBaseline { objective, candidates, best })
}

/// Settings for [`tradeoff_sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub n_points: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub cost: CostSelection,
    pub constraints: ConstraintOptions,
    pub solver: SolverConfig,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            n_points: 30,
            gamma1: DEFAULT_GAMMA1,
            gamma2: DEFAULT_GAMMA2,
            cost: CostSelection::Total,
            constraints: ConstraintOptions::default(),
            solver: SolverConfig::default(),
        }
    }
}

/// `{0, 1} ∪ sigmoid(linspace(-6, 6, n - 2))`, ascending.
pub fn theta_grid(n_points: usize) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(Error::InvalidParameter(format!("sweep needs at least 2 points, got {n_points}")));
    }
    let inner = n_points - 2;
    let mut g = vec![0.0];
    for i in 0..inner {
        let x = if inner == 1 { 0.0 } else { -6.0 + 12.0 * i as f64 / (inner - 1) as f64 };
        g.push(1.0 / (1.0 + (-x).exp()));
    }
    g.push(1.0);
    Ok(g)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub theta: f64,
    /// Total motor energy `E_m` (J).
    pub energy_total: f64,
    /// Joule plus viscous energy (J).
    pub energy_dissipated: f64,
    pub peak_power: f64,
    pub peak_power_cvx: f64,
    /// Energy term of the scalarized objective at the solution.
    pub energy_term: f64,
    /// `max p_cvx + γ₁ ‖D2 q‖∞` at the solution.
    pub power_term: f64,
    /// Dissipated energy relative to rigid (%).
    pub rel_energy: f64,
    /// True peak power relative to rigid (%).
    pub rel_peak: f64,
    pub feasible: bool,
    /// Solver status, or `error` when assembly failed.
    pub status: String,
    pub iterations: usize,
    pub solution_ref: String,
    pub metrics: Option<Metrics>,
    #[serde(skip)]
    pub q_m: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub points: Vec<TradeoffPoint>,
    pub rigid: Metrics,
    /// Index of the maximum-curvature point of the normalized curve.
    pub knee: Option<usize>,
    /// Wall-clock solve time per point (s); excluded from reproducibility checks.
    #[serde(skip)]
    pub timings: Vec<f64>,
}

fn relative(x: f64, rigid: f64) -> f64 {
    if rigid == 0.0 {
        0.0
    } else {
        100.0 * (x - rigid) / rigid
    }
}

/// Solves the program over the θ grid concurrently; failed points are kept
/// with their status.
pub fn tradeoff_sweep(
    traj: &Trajectory,
    load: &LoadModel,
    p: &MotorParams,
    ops: &DiffOperators,
    settings: &SweepSettings,
) -> Result<TradeoffCurve> {
    let thetas = theta_grid(settings.n_points)?;
    let rigid = rigid_baseline(traj, load, p, ops)?;
    let results: Vec<(TradeoffPoint, f64)> = thetas
        .par_iter()
        .enumerate()
        .map(|(idx, &theta)| {
            let t0 = Instant::now();
            let point = sweep_point(traj, load, p, ops, settings, theta, idx, &rigid);
            (point, t0.elapsed().as_secs_f64())
        })
        .collect();
    let (points, timings): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let knee = knee_point(&points);
    Ok(TradeoffCurve { points, rigid, knee, timings })
}

#[allow(clippy::too_many_arguments)]
fn sweep_point(
    traj: &Trajectory,
    load: &LoadModel,
    p: &MotorParams,
    ops: &DiffOperators,
    settings: &SweepSettings,
    theta: f64,
    idx: usize,
    rigid: &Metrics,
) -> TradeoffPoint {
    let failed = |status: String| TradeoffPoint {
        theta,
        energy_total: f64::NAN,
        energy_dissipated: f64::NAN,
        peak_power: f64::NAN,
        peak_power_cvx: f64::NAN,
        energy_term: f64::NAN,
        power_term: f64::NAN,
        rel_energy: f64::NAN,
        rel_peak: f64::NAN,
        feasible: false,
        status,
        iterations: 0,
        solution_ref: format!("theta-{idx:02}"),
        metrics: None,
        q_m: Vec::new(),
    };
    let ds = DesignSettings {
        theta,
        gamma1: settings.gamma1,
        gamma2: settings.gamma2,
        cost: settings.cost,
        constraints: settings.constraints,
    };
    let inst = match assemble_instance(traj, load, p, ops, &ds) {
        Ok(i) => i,
        Err(e) => return failed(format!("error: {e}")),
    };
    let sol = match solve(&inst, &settings.solver) {
        Ok(s) => s,
        Err(e) => return failed(format!("error: {e}")),
    };
    let m = match evaluate_metrics(&sol.q_m, traj, load, p, ops) {
        Ok(m) => m,
        Err(e) => return failed(format!("error: {e}")),
    };
    let (s, a) = inst.tight_slacks(&sol.q_m);
    TradeoffPoint {
        theta,
        energy_total: m.breakdown.total,
        energy_dissipated: m.breakdown.dissipated(),
        peak_power: m.peak_power,
        peak_power_cvx: m.peak_power_cvx,
        energy_term: inst.energy.evaluate(&sol.q_m),
        power_term: s + settings.gamma1 * a,
        rel_energy: relative(m.breakdown.dissipated(), rigid.breakdown.dissipated()),
        rel_peak: relative(m.peak_power, rigid.peak_power),
        feasible: sol.status == Status::Optimal,
        status: sol.status.to_string(),
        iterations: sol.iterations,
        solution_ref: format!("theta-{idx:02}"),
        metrics: Some(m),
        q_m: sol.q_m,
    }
}

/// Maximum discrete (Menger) curvature of the feasible points in the
/// `(rel_peak, rel_energy)` plane after min–max normalization.
pub fn knee_point(points: &[TradeoffPoint]) -> Option<usize> {
    let idx: Vec<usize> = (0..points.len()).filter(|&i| points[i].feasible).collect();
    if idx.len() < 3 {
        return None;
    }
    let xs: Vec<f64> = idx.iter().map(|&i| points[i].rel_peak).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| points[i].rel_energy).collect();
    let norm = |v: &[f64]| -> Vec<f64> {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        v.iter().map(|x| (x - lo) / span).collect()
    };
    let (x, y) = (norm(&xs), norm(&ys));
    let mut best: Option<(f64, usize)> = None;
    for k in 1..idx.len() - 1 {
        let (ax, ay) = (x[k - 1], y[k - 1]);
        let (bx, by) = (x[k], y[k]);
        let (cx, cy) = (x[k + 1], y[k + 1]);
        let area2 = ((bx - ax) * (cy - ay) - (by - ay) * (cx - ax)).abs();
        let ab = (bx - ax).hypot(by - ay);
        let bc = (cx - bx).hypot(cy - by);
        let ca = (ax - cx).hypot(ay - cy);
        let denom = ab * bc * ca;
        if denom <= 1e-12 {
            continue;
        }
        let kappa = 2.0 * area2 / denom;
        if best.is_none_or(|b| kappa > b.0) {
            best = Some((kappa, idx[k]));
        }
    }
    best.map(|b| b.1)
}

/// `theta,energy_J,peak_W,peak_cvx_W,rel_energy_pct,rel_peak_pct,status` rows.
pub fn curve_csv(curve: &TradeoffCurve) -> String {
    let mut s = String::from("theta,energy_J,peak_W,peak_cvx_W,rel_energy_pct,rel_peak_pct,status\n");
    for p in &curve.points {
        let _ = writeln!(
            s,
            "{:?},{:?},{:?},{:?},{:?},{:?},{}",
            p.theta, p.energy_total, p.peak_power, p.peak_power_cvx, p.rel_energy, p.rel_peak, p.status
        );
    }
    s
}

/// Scatter of relative dissipated energy against relative peak power.
pub fn curve_svg(curve: &TradeoffCurve) -> String {
    let (w, h, m) = (640.0, 480.0, 60.0);
    let pts: Vec<&TradeoffPoint> = curve.points.iter().filter(|p| p.feasible).collect();
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let bounds = |f: &dyn Fn(&TradeoffPoint) -> f64| {
        let lo = pts.iter().map(|p| f(p)).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| f(p)).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 1.0, hi + 1.0)
        }
    };
    let (x0, x1) = bounds(&|p| p.rel_peak);
    let (y0, y1) = bounds(&|p| p.rel_energy);
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let _ = writeln!(
        s,
        "<line x1=\"{m}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{}\" stroke=\"black\"/>",
        h - m,
        w - m,
        h - m,
        h - m
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">peak power relative to rigid (%) [{x0:.1}, {x1:.1}]</text>",
        w / 2.0,
        h - 20.0
    );
    let _ = writeln!(
        s,
        "<text x=\"20\" y=\"{}\" font-size=\"14\" transform=\"rotate(-90 20 {})\" text-anchor=\"middle\">dissipated energy relative to rigid (%) [{y0:.1}, {y1:.1}]</text>",
        h / 2.0,
        h / 2.0
    );
    for (i, p) in curve.points.iter().enumerate().filter(|(_, p)| p.feasible) {
        let fill = if Some(i) == curve.knee { "red" } else { "steelblue" };
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{fill}\"><title>theta = {:.4}</title></circle>",
            px(p.rel_peak),
            py(p.rel_energy),
            p.theta
        );
    }
    s.push_str("</svg>\n");
    s
}
