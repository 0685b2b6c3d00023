//! Independent checks: a generic RK4 integrator, rectangle-rule energy
//! quadrature, finite-difference gradient checks and planted-solution QCQPs.
//!
//! The integrator, quadrature and planted instances do not call into the
//! modules they check; summations and stencils are written out again on
//! purpose. The order studies run the real operators against analytic
//! references.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seaspring_qcqp::{CsrMatrix, Multipliers, Qcqp, RankOneConstraint, SparseVec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Classical fixed-step RK4; returns `steps + 1` states including `x0`.
pub fn rk4_integrate<F>(field: F, x0: &[f64], dt: f64, steps: usize) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let dim = x0.len();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x0.to_vec());
    let mut x = x0.to_vec();
    let mut tmp = vec![0.0; dim];
    for s in 0..steps {
        let t = s as f64 * dt;
        let k1 = field(t, &x);
        for i in 0..dim {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        let k2 = field(t + 0.5 * dt, &tmp);
        for i in 0..dim {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        let k3 = field(t + 0.5 * dt, &tmp);
        for i in 0..dim {
            tmp[i] = x[i] + dt * k3[i];
        }
        let k4 = field(t + dt, &tmp);
        for i in 0..dim {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState(s + 1));
        }
        out.push(x.clone());
    }
    Ok(out)
}

/// Rectangle-rule motor energy terms (J).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureEnergy {
    /// `Σ τ_m² / k_m² Δt`
    pub joule: f64,
    /// `Σ τ_m q̇_m Δt`
    pub mechanical: f64,
    pub total: f64,
}

/// Energy of a periodic motor trajectory; velocity by periodic central differences.
pub fn quadrature_energy(q_m: &[f64], tau_m: &[f64], dt: f64, k_m: f64) -> Result<QuadratureEnergy> {
    let n = q_m.len();
    if n < 3 {
        return Err(Error::TooFewSamples { min: 3, got: n });
    }
    let vel: Vec<f64> = (0..n).map(|i| (q_m[(i + 1) % n] - q_m[(i + n - 1) % n]) / (2.0 * dt)).collect();
    quadrature_energy_with_velocity(&vel, tau_m, dt, k_m)
}

pub fn quadrature_energy_with_velocity(dq_m: &[f64], tau_m: &[f64], dt: f64, k_m: f64) -> Result<QuadratureEnergy> {
    if dq_m.len() != tau_m.len() {
        return Err(Error::Dimension(format!("{} velocities vs {} torques", dq_m.len(), tau_m.len())));
    }
    let mut joule = 0.0;
    let mut mechanical = 0.0;
    for (&v, &t) in dq_m.iter().zip(tau_m) {
        joule += t * t / (k_m * k_m) * dt;
        mechanical += t * v * dt;
    }
    Ok(QuadratureEnergy { joule, mechanical, total: joule + mechanical })
}

/// Largest deviation between central finite differences of `f` and `grad`,
/// relative to `max(‖grad‖∞, 1)`.
pub fn finite_diff_gradient_check<F, G>(f: F, grad: G, q: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let g = grad(q);
    let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut x = q.to_vec();
    let mut worst = 0.0f64;
    for i in 0..q.len() {
        x[i] = q[i] + h;
        let fp = f(&x);
        x[i] = q[i] - h;
        let fm = f(&x);
        x[i] = q[i];
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / scale);
    }
    worst
}

/// Which constraints a planted instance carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivePattern {
    /// Some inequalities active, some slack.
    Mixed,
    /// All inequalities slack: `x*` is the unconstrained minimizer.
    NoneActive,
    /// Equalities only.
    AllEquality,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantFlags {
    pub pattern: ActivePattern,
    pub quadratic: bool,
    pub equalities: bool,
}

impl Default for PlantFlags {
    fn default() -> Self {
        PlantFlags { pattern: ActivePattern::Mixed, quadratic: true, equalities: true }
    }
}

/// A QCQP whose optimum is known by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedInstance {
    pub problem: Qcqp,
    pub x_star: Vec<f64>,
    pub multipliers: Multipliers,
    pub objective_star: f64,
    pub seed: u64,
    /// Seed actually used after retries.
    pub draw_seed: u64,
}

const MAX_DRAWS: u64 = 8;

/// Draws a convex instance with `x*` KKT-optimal.
///
/// The objective Hessian is a Gram matrix, linear rows mimic central
/// differences, and rank-one constraints use difference rows as factors.
/// Right-hand sides are back-solved so the chosen active set holds at `x*`,
/// and the linear cost is set from stationarity.
pub fn plant_instance(n: usize, seed: u64, flags: PlantFlags) -> Result<PlantedInstance> {
    if n < 4 {
        return Err(Error::TooFewSamples { min: 4, got: n });
    }
    for k in 0..MAX_DRAWS {
        let draw_seed = seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        if let Some(inst) = draw(n, seed, draw_seed, flags) {
            return Ok(inst);
        }
    }
    Err(Error::DegenerateDraw(MAX_DRAWS as usize))
}

fn draw(n: usize, seed: u64, draw_seed: u64, flags: PlantFlags) -> Option<PlantedInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(draw_seed);
    let x_star: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

    // Gram Hessian; rank-deficient when constraints pin the rest
    let rank = match flags.pattern {
        ActivePattern::Mixed => n / 2 + 1,
        _ => n + 2,
    };
    let b: Vec<Vec<f64>> = (0..rank).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut p_trip = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let v: f64 = b.iter().map(|row| row[i] * row[j]).sum::<f64>() / rank as f64;
            p_trip.push((i, j, v));
        }
    }
    let p = CsrMatrix::from_triplets(n, n, &p_trip);

    let mut grad_sum = p.mul_vec(&x_star);
    let mut z = Vec::new();

    // linear inequalities
    let mut a_trip = Vec::new();
    let mut b_ineq = Vec::new();
    if flags.pattern != ActivePattern::AllEquality {
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
        for i in 0..n {
            let s = rng.gen_range(0.5..2.0);
            rows.push(vec![((i + 1) % n, s), ((i + n - 1) % n, -s)]);
        }
        for _ in 0..n / 2 {
            let mut cols: Vec<usize> = (0..3).map(|_| rng.gen_range(0..n)).collect();
            cols.sort_unstable();
            cols.dedup();
            rows.push(cols.into_iter().map(|j| (j, rng.gen_range(-1.0..1.0))).collect());
        }
        for row in rows {
            let k = b_ineq.len();
            let ax: f64 = row.iter().map(|&(j, v)| v * x_star[j]).sum();
            let active = flags.pattern == ActivePattern::Mixed && rng.gen_bool(0.3);
            let (slack, zk) = if active { (0.0, rng.gen_range(0.5..2.0)) } else { (rng.gen_range(0.1..1.0), 0.0) };
            for &(j, v) in &row {
                a_trip.push((k, j, v));
                grad_sum[j] += zk * v;
            }
            b_ineq.push(ax + slack);
            z.push(zk);
        }
    }
    let a_ineq = CsrMatrix::from_triplets(b_ineq.len(), n, &a_trip);

    // rank-one quadratic inequalities
    let mut quad = Vec::new();
    if flags.quadratic && flags.pattern != ActivePattern::AllEquality {
        for i in 0..n.div_ceil(3) {
            let c = (3 * i) % n;
            let (prev, next) = ((c + n - 1) % n, (c + 1) % n);
            let s = rng.gen_range(0.5..1.5);
            let u = if prev < next {
                SparseVec::new(vec![prev, next], vec![-s, s])
            } else {
                SparseVec::new(vec![next, prev], vec![s, -s])
            };
            let gj = rng.gen_range(0..n);
            let g = SparseVec::new(vec![gj], vec![rng.gen_range(-1.0..1.0)]);
            let weight = rng.gen_range(0.5..2.0);
            let mut con = RankOneConstraint { weight, u, g, h: 0.0 };
            let val = con.value(&x_star);
            let active = flags.pattern == ActivePattern::Mixed && rng.gen_bool(0.4);
            let (slack, zk) = if active { (0.0, rng.gen_range(0.5..2.0)) } else { (rng.gen_range(0.1..1.0), 0.0) };
            con.h = -val - slack;
            con.grad_axpy(&x_star, zk, &mut grad_sum);
            quad.push(con);
            z.push(zk);
        }
    }

    // equalities
    let mut e_trip = Vec::new();
    let mut b_eq = Vec::new();
    let mut y = Vec::new();
    let m_eq = match flags.pattern {
        ActivePattern::AllEquality => n / 2,
        _ if flags.equalities => n / 4,
        _ => 0,
    };
    for k in 0..m_eq {
        // distinct leading column keeps the rows independent
        let lead = (2 * k) % n;
        let mut row = vec![(lead, 1.0)];
        for _ in 0..2 {
            let j = rng.gen_range(0..n);
            if j != lead {
                row.push((j, rng.gen_range(-1.0..1.0)));
            }
        }
        let yk = rng.gen_range(-1.0..1.0);
        let mut rhs = 0.0;
        for &(j, v) in &row {
            e_trip.push((k, j, v));
            rhs += v * x_star[j];
            grad_sum[j] += yk * v;
        }
        b_eq.push(rhs);
        y.push(yk);
    }
    let a_eq = CsrMatrix::from_triplets(m_eq, n, &e_trip);

    let c: Vec<f64> = grad_sum.iter().map(|g| -g).collect();
    let problem = Qcqp::new(p, c, 0.0)
        .with_inequalities(a_ineq, b_ineq)
        .with_equalities(a_eq, b_eq)
        .with_quadratic(quad);
    if problem.validate().is_err() || problem.c.iter().any(|v| !v.is_finite()) {
        return None;
    }
    if problem.a_ineq.nrows() > 0 && (0..problem.a_ineq.nrows()).any(|i| problem.a_ineq.row(i).0.is_empty()) {
        return None;
    }
    let objective_star = problem.objective(&x_star);
    Some(PlantedInstance { problem, x_star, multipliers: Multipliers { z, y }, objective_star, seed, draw_seed })
}

/// Errors of one quantity under successive grid doublings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderStudy {
    pub n: Vec<usize>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `-log(error)` against `log(n)`.
    pub order: f64,
}

/// Least-squares slope of `-log(err)` against `log(n)`.
pub fn fit_order(n: &[usize], err: &[f64]) -> f64 {
    let xs: Vec<f64> = n.iter().map(|&v| (v as f64).ln()).collect();
    let ys: Vec<f64> = err.iter().map(|&e| -e.max(1e-300).ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn doubling_grid(n0: usize, refinements: usize) -> Result<Vec<usize>> {
    if n0 < 8 || refinements == 0 {
        return Err(Error::InvalidParameter("order study needs n0 >= 8 and at least one refinement".into()));
    }
    Ok((0..=refinements).map(|k| n0 << k).collect())
}

// smooth one-period test signal and its derivatives, T = 1
fn test_signal(t: f64) -> (f64, f64) {
    let w = 2.0 * std::f64::consts::PI;
    let u = (w * t).sin() + 0.3 * (2.0 * w * t + 0.4).sin();
    let du = w * (w * t).cos() + 0.6 * w * (2.0 * w * t + 0.4).cos();
    (u, du)
}

/// Max error of the periodic central difference on a smooth signal.
pub fn derivative_order_study(n0: usize, refinements: usize) -> Result<OrderStudy> {
    let ns = doubling_grid(n0, refinements)?;
    let mut errors = Vec::with_capacity(ns.len());
    for &n in &ns {
        let dt = 1.0 / n as f64;
        let ops = crate::discretization::build_operators(n, dt)?;
        let (u, du): (Vec<f64>, Vec<f64>) = (0..n).map(|i| test_signal(i as f64 * dt)).unzip();
        let d = ops.apply_d(&u);
        errors.push(d.iter().zip(&du).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let order = fit_order(&ns, &errors);
    Ok(OrderStudy { n: ns, errors, order })
}

/// Residual of the discrete periodic energy identity
/// `Σ τ_m D q_m Δt = Σ (b_m (D q_m)² - τ_ela q̇_l / η) Δt`
/// for a smooth load motion carried by a stiffening spring, with the load
/// velocity taken exactly.
pub fn energy_identity_order_study(
    p: &crate::discretization::MotorParams,
    n0: usize,
    refinements: usize,
) -> Result<OrderStudy> {
    p.validate()?;
    let ns = doubling_grid(n0, refinements)?;
    let w = 2.0 * std::f64::consts::PI;
    let mut errors = Vec::with_capacity(ns.len());
    for &n in &ns {
        let dt = 1.0 / n as f64;
        let ops = crate::discretization::build_operators(n, dt)?;
        let mut q_l = Vec::with_capacity(n);
        let mut dq_l = Vec::with_capacity(n);
        let mut tau = Vec::with_capacity(n);
        let mut q_m = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 * dt;
            let (u, du) = test_signal(t);
            let delta = 0.2 * (w * t + 0.3).sin() + 0.05 * (3.0 * w * t).cos();
            q_l.push(u);
            dq_l.push(du);
            tau.push(40.0 * delta * delta * delta + 5.0 * delta);
            q_m.push(p.r * (u - delta));
        }
        let tau_m = crate::discretization::motor_torque(&q_m, &tau, p, &ops)?;
        let v = ops.apply_d(&q_m);
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for i in 0..n {
            lhs += tau_m[i] * v[i] * dt;
            rhs += (p.b_m * v[i] * v[i] - tau[i] * dq_l[i] / p.eta) * dt;
        }
        errors.push((lhs - rhs).abs());
    }
    let order = fit_order(&ns, &errors);
    Ok(OrderStudy { n: ns, errors, order })
}
