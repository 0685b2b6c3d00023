use seaspring_core::analysis::{
    curve_csv, curve_svg, default_stiffness_grid, energy_breakdown, evaluate_metrics, knee_point, linear_spring_baseline,
    linear_spring_motor, peak_power_cvx, peak_power_true, rigid_baseline, theta_grid, tradeoff_sweep, LinearObjective,
    SweepSettings, TradeoffPoint,
};
use seaspring_core::discretization::{build_operators, elastic_torque, motor_torque, power_series, DiffOperators, MotorParams};
use seaspring_core::fixtures::{cubic_task, running_task, walking_task, Task};
use seaspring_core::oracle::quadrature_energy;
use seaspring_core::problem::{assemble_instance, DesignSettings, Limits};
use seaspring_core::solver::{solve, SolverConfig};
use seaspring_core::trajectory::Trajectory;

fn ops_for(t: &Trajectory) -> DiffOperators {
    build_operators(t.n, t.dt).unwrap()
}

fn rigid(task: &Task) -> Vec<f64> {
    task.trajectory.q_l.iter().map(|q| task.motor.r * q).collect()
}

fn energy_optimum(task: &Task) -> Vec<f64> {
    let t = &task.trajectory;
    let ops = ops_for(t);
    let inst = assemble_instance(t, &task.load, &task.motor, &ops, &DesignSettings::default()).unwrap();
    let sol = solve(&inst, &SolverConfig::default()).unwrap();
    assert!(sol.is_optimal());
    sol.q_m
}

#[test]
fn zero_motion_and_zero_load_cost_nothing() {
    let t = Trajectory::from_positions(vec![0.0; 32], vec![0.0; 32], 0.01, "zero").unwrap();
    let task = walking_task(32).unwrap();
    let ops = ops_for(&t);
    let b = energy_breakdown(&vec![0.0; 32], &t, &task.load, &task.motor, &ops).unwrap();
    assert_eq!((b.joule, b.viscous, b.load_mech, b.total), (0.0, 0.0, 0.0, 0.0));
    assert_eq!(peak_power_true(&vec![0.0; 32], &t.tau_ext, &task.motor, &ops).unwrap(), 0.0);
    assert!(energy_breakdown(&vec![0.0; 31], &t, &task.load, &task.motor, &ops).is_err());
}

#[test]
fn breakdown_is_additive_and_the_load_term_ignores_the_spring() {
    let task = walking_task(114).unwrap();
    let t = &task.trajectory;
    let ops = ops_for(t);
    let tau = elastic_torque(t, &task.load);
    let a = energy_breakdown(&rigid(&task), t, &task.load, &task.motor, &ops).unwrap();
    let q = linear_spring_motor(t, &tau, task.motor.r, 800.0);
    let b = energy_breakdown(&q, t, &task.load, &task.motor, &ops).unwrap();
    for x in [a, b] {
        assert!((x.total - (x.joule + x.viscous + x.load_mech)).abs() < 1e-12 * x.total.abs().max(1.0));
        assert!((x.dissipated() - (x.joule + x.viscous)).abs() < 1e-12 * x.total.abs().max(1.0));
    }
    assert_eq!(a.load_mech, b.load_mech);
}

#[test]
fn rigid_breakdown_matches_quadrature() {
    for task in [cubic_task(301).unwrap(), walking_task(114).unwrap(), running_task(66).unwrap()] {
        let t = &task.trajectory;
        let ops = ops_for(t);
        let q = rigid(&task);
        let tau = elastic_torque(t, &task.load);
        let tm = motor_torque(&q, &tau, &task.motor, &ops).unwrap();
        let quad = quadrature_energy(&q, &tm, t.dt, task.motor.k_m).unwrap();
        let m = rigid_baseline(t, &task.load, &task.motor, &ops).unwrap();
        let tol = 1e-6 * quad.total.abs().max(1.0);
        assert!((m.breakdown.total - quad.total).abs() < tol, "{}", task.name);
        assert!((m.breakdown.joule - quad.joule).abs() < tol, "{}", task.name);
    }
}

#[test]
fn without_inertia_true_and_surrogate_power_coincide() {
    let task = walking_task(114).unwrap();
    let t = &task.trajectory;
    let ops = ops_for(t);
    let p = MotorParams { i_m: 0.0, ..task.motor };
    let q = rigid(&task);
    let ps = power_series(&q, &t.tau_ext, &p, &ops).unwrap();
    let signed_max = ps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cvx = peak_power_cvx(&q, &t.tau_ext, &p, &ops).unwrap();
    assert!((cvx - signed_max).abs() < 1e-9 * signed_max.abs());
    assert!(cvx <= peak_power_true(&q, &t.tau_ext, &p, &ops).unwrap() + 1e-9);
}

#[test]
fn surrogate_peak_is_the_same_order_as_the_true_peak() {
    for task in [walking_task(114).unwrap(), running_task(66).unwrap()] {
        let t = &task.trajectory;
        let ops = ops_for(t);
        let m = rigid_baseline(t, &task.load, &task.motor, &ops).unwrap();
        let ratio = m.peak_power_cvx / m.peak_power;
        assert!(ratio > 0.1 && ratio < 10.0, "{}: ratio {ratio}", task.name);
    }
}

#[test]
fn a_very_stiff_linear_spring_behaves_rigidly() {
    let task = walking_task(114).unwrap();
    let t = &task.trajectory;
    let ops = ops_for(t);
    let grid = default_stiffness_grid(t, &task.load, 2);
    let k = grid[1] * 1e3;
    let q = linear_spring_motor(t, &t.tau_ext, task.motor.r, k);
    let a = evaluate_metrics(&q, t, &task.load, &task.motor, &ops).unwrap();
    let b = rigid_baseline(t, &task.load, &task.motor, &ops).unwrap();
    assert!((a.breakdown.total - b.breakdown.total).abs() < 1e-3 * b.breakdown.total.abs());
    assert!((a.peak_power - b.peak_power).abs() < 1e-3 * b.peak_power);
}

#[test]
fn stiffness_grid_spans_six_decades() {
    let task = walking_task(114).unwrap();
    let g = default_stiffness_grid(&task.trajectory, &task.load, 25);
    assert_eq!(g.len(), 25);
    assert!(g.windows(2).all(|w| w[1] > w[0]));
    assert!(((g[24] / g[0]).log10() - 6.0).abs() < 1e-9);
}

#[test]
fn linear_baseline_rejects_narrow_grids() {
    let task = walking_task(60).unwrap();
    let t = &task.trajectory;
    let ops = ops_for(t);
    let run = |g: &[f64]| linear_spring_baseline(t, &task.load, &task.motor, &ops, g, LinearObjective::Energy, &Limits::none());
    assert!(run(&[1.0]).is_err());
    assert!(run(&[1.0, 10.0]).is_err());
    assert!(run(&[1.0, -5.0, 1e4]).is_err());
    assert!(run(&[1.0, 1e3]).is_ok());
}

#[test]
fn nonlinear_beats_linear_on_the_cubic_task() {
    let task = cubic_task(201).unwrap();
    let t = &task.trajectory;
    let ops = ops_for(t);
    let grid = default_stiffness_grid(t, &task.load, 60);
    let lin = linear_spring_baseline(t, &task.load, &task.motor, &ops, &grid, LinearObjective::Energy, &Limits::none())
        .unwrap();
    let best = lin.best.expect("unconstrained linear search has a feasible candidate");
    let q = energy_optimum(&task);
    let nl = evaluate_metrics(&q, t, &task.load, &task.motor, &ops).unwrap();
    assert!(nl.breakdown.total < best.metrics.breakdown.total, "{} vs {}", nl.breakdown.total, best.metrics.breakdown.total);
}

#[test]
fn walking_energies_are_ordered() {
    let task = walking_task(114).unwrap();
    let t = &task.trajectory;
    let ops = ops_for(t);
    let grid = default_stiffness_grid(t, &task.load, 60);
    let lin = linear_spring_baseline(t, &task.load, &task.motor, &ops, &grid, LinearObjective::Energy, &Limits::none())
        .unwrap();
    let linear = lin.best.unwrap().metrics.breakdown.total;
    let rigid = rigid_baseline(t, &task.load, &task.motor, &ops).unwrap().breakdown.total;
    let q = energy_optimum(&task);
    let nonlinear = evaluate_metrics(&q, t, &task.load, &task.motor, &ops).unwrap().breakdown.total;
    let tol = 1e-6 * rigid.abs();
    assert!(nonlinear <= linear + tol, "{nonlinear} vs {linear}");
    assert!(linear <= rigid + tol, "{linear} vs {rigid}");
    // the rigid limit is among the candidates
    assert!(lin.candidates.last().unwrap().stiffness.is_none());
}

#[test]
fn running_limits_exclude_every_linear_spring() {
    let task = running_task(66).unwrap();
    let t = &task.trajectory;
    let ops = ops_for(t);
    let grid = default_stiffness_grid(t, &task.load, 60);
    let lin =
        linear_spring_baseline(t, &task.load, &task.motor, &ops, &grid, LinearObjective::Energy, &task.limits).unwrap();
    assert!(lin.best.is_none());
    assert!(lin.candidates.iter().all(|c| !c.feasible));
}

#[test]
fn theta_grid_shape() {
    assert_eq!(theta_grid(2).unwrap(), vec![0.0, 1.0]);
    assert_eq!(theta_grid(3).unwrap(), vec![0.0, 0.5, 1.0]);
    let g = theta_grid(30).unwrap();
    assert_eq!(g.len(), 30);
    assert!(g.windows(2).all(|w| w[1] > w[0]));
    for k in 1..29 {
        assert!((g[k] + g[29 - k] - 1.0).abs() < 1e-12);
    }
    assert!((g[1] - 1.0 / (1.0 + 6f64.exp())).abs() < 1e-15);
    assert!(theta_grid(1).is_err());
}

#[test]
fn sweep_endpoints_minimize_their_own_terms() {
    let task = walking_task(60).unwrap();
    let t = &task.trajectory;
    let ops = ops_for(t);
    let settings = SweepSettings { n_points: 7, ..Default::default() };
    let curve = tradeoff_sweep(t, &task.load, &task.motor, &ops, &settings).unwrap();
    assert_eq!(curve.points.len(), 7);
    assert!(curve.points.iter().all(|p| p.feasible), "{:?}", curve.points.iter().map(|p| &p.status).collect::<Vec<_>>());
    let first = &curve.points[0];
    let last = &curve.points[6];
    assert_eq!((first.theta, last.theta), (0.0, 1.0));
    for p in &curve.points {
        assert!(last.energy_term <= p.energy_term + 1e-6 * p.energy_term.abs(), "theta {}", p.theta);
        assert!(first.power_term <= p.power_term + 1e-6 * p.power_term.abs(), "theta {}", p.theta);
    }
    let csv = curve_csv(&curve);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 8);
    assert!(lines[0].ends_with(",status"));
    assert!(lines[1..].iter().all(|l| l.ends_with(",optimal")), "{csv}");
    let svg = curve_svg(&curve);
    assert_eq!(svg.matches("<circle").count(), 7);
}

fn point(x: f64, y: f64) -> TradeoffPoint {
    TradeoffPoint {
        theta: 0.0,
        energy_total: 0.0,
        energy_dissipated: 0.0,
        peak_power: 0.0,
        peak_power_cvx: 0.0,
        energy_term: 0.0,
        power_term: 0.0,
        rel_energy: y,
        rel_peak: x,
        feasible: true,
        status: "optimal".into(),
        iterations: 0,
        solution_ref: String::new(),
        metrics: None,
        q_m: Vec::new(),
    }
}

#[test]
fn knee_is_the_corner_of_an_l_shaped_curve() {
    let pts: Vec<TradeoffPoint> = [(0.0, 10.0), (0.1, 5.0), (0.2, 0.5), (5.0, 0.3), (10.0, 0.0)]
        .iter()
        .map(|&(x, y)| point(x, y))
        .collect();
    assert_eq!(knee_point(&pts), Some(2));
    assert_eq!(knee_point(&pts[..2]), None);
    let mut with_failure = pts.clone();
    with_failure[2].feasible = false;
    assert_ne!(knee_point(&with_failure), Some(2));
}
