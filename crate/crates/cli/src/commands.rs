use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use seaspring_core::analysis::{
    curve_csv, curve_svg, default_stiffness_grid, evaluate_metrics, linear_spring_baseline, rigid_baseline,
    tradeoff_sweep, LinearObjective, SweepSettings,
};
use seaspring_core::discretization::{build_operators, elastic_torque, elongation, motor_torque};
use seaspring_core::oracle::{
    derivative_order_study, energy_identity_order_study, finite_diff_gradient_check, plant_instance, quadrature_energy,
    ActivePattern, PlantFlags,
};
use seaspring_core::problem::{assemble_energy_cost, assemble_instance, ConstraintOptions, DesignSettings};
use seaspring_core::solver::{solve, Status};
use seaspring_core::spring::{build_profile_with, Provenance};
use seaspring_core::trajectory::generate_cubic_oscillation;

use crate::config::{BaselineObjective, RunConfig};
use crate::{status_exit_code, CliError, EXIT_INFEASIBLE, EXIT_OK, EXIT_SOLVER};

/// What a command produced.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = cfg.output_dir();
        fs::create_dir_all(&dir)?;
        Ok(Output { dir, files: Vec::new() })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
        s.push('\n');
        self.text(name, &s)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// Run-dependent data kept apart so the rest of each file is reproducible.
fn metadata(started: Instant, extra: Value) -> Value {
    json!({
        "elapsed_s": started.elapsed().as_secs_f64(),
        "version": env!("CARGO_PKG_VERSION"),
        "extra": extra,
    })
}

fn csv_with_hash(hash: &str, body: &str) -> String {
    format!("# config_hash: {hash}\n{body}")
}

pub fn generate_cubic(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let hash = cfg.hash();
    let sys = cfg.cubic_system();
    let osc = generate_cubic_oscillation(&sys, cfg.grid())?;
    let traj = &osc.trajectory;
    let mut out = Output::new(cfg)?;
    out.text("cubic_trajectory.csv", &csv_with_hash(&hash, &traj.to_csv_string()))?;
    out.json(
        "cubic_trajectory.json",
        &json!({
            "config_hash": hash,
            "system": sys,
            "n": traj.n,
            "dt": traj.dt,
            "period": osc.period,
            "energy0": osc.energy0,
            "energy_drift": osc.energy_drift,
            "internal_steps": osc.internal_steps,
            "closure_error": traj.closure_error(),
            "metadata": metadata(started, Value::Null),
        }),
    )?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        summary: format!("cubic oscillation: n = {}, period = {:.6} s, drift = {:.2e}", traj.n, osc.period, osc.energy_drift),
        files: out.files,
    })
}

pub fn design(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let hash = cfg.hash();
    let task = cfg.resolve_task()?;
    let traj = &task.trajectory;
    let p = task.motor;
    let ops = build_operators(traj.n, traj.dt)?;
    let d = &cfg.design;
    let settings = DesignSettings {
        theta: d.theta,
        gamma1: d.gamma1,
        gamma2: d.gamma2,
        cost: d.cost,
        constraints: ConstraintOptions { limits: task.limits, mode: d.monotonicity, eps_strict: d.eps_strict },
    };
    let inst = assemble_instance(traj, &task.load, &p, &ops, &settings)?;
    let sol = solve(&inst, &cfg.solver.config())?;
    let metrics = evaluate_metrics(&sol.q_m, traj, &task.load, &p, &ops)?;
    let rigid = rigid_baseline(traj, &task.load, &p, &ops)?;
    let tau = elastic_torque(traj, &task.load);
    let delta = elongation(&sol.q_m, &traj.q_l, p.r)?;
    let tau_m = motor_torque(&sol.q_m, &tau, &p, &ops)?;

    let mut out = Output::new(cfg)?;
    let mut trace = String::from("time,q_m,delta,tau_ela,tau_m\n");
    for i in 0..traj.n {
        trace.push_str(&format!("{:?},{:?},{:?},{:?},{:?}\n", i as f64 * traj.dt, sol.q_m[i], delta[i], tau[i], tau_m[i]));
    }
    out.text("motor_trajectory.csv", &csv_with_hash(&hash, &trace))?;

    let source = Provenance { label: task.name.clone(), theta: Some(d.theta), hash: hash.clone() };
    let profile = if sol.is_optimal() { Some(build_profile_with(&delta, &tau, d.tol_merge, source)) } else { None };
    let profile_summary = match &profile {
        Some(Ok(prof)) => {
            out.text("profile.csv", &prof.to_csv_string())?;
            json!({
                "samples": prof.len(),
                "delta_range": prof.range(),
                "cubic_coefficient": prof.cubic_coefficient(),
                "error": Value::Null,
            })
        }
        Some(Err(e)) => json!({ "error": e.to_string() }),
        None => json!({ "error": format!("no profile: solver status {}", sol.status) }),
    };
    let dissipated = metrics.breakdown.dissipated();
    let rigid_dissipated = rigid.breakdown.dissipated();
    let limits_ok = metrics.within(&task.limits, 1e-6);
    out.json(
        "solution.json",
        &json!({
            "config_hash": hash,
            "task": task.name,
            "n": traj.n,
            "theta": d.theta,
            "cost": d.cost,
            "status": sol.status,
            "objective": sol.objective,
            "s": sol.s,
            "a": sol.a,
            "iterations": sol.iterations,
            "kkt": sol.kkt,
            "witness": sol.witness,
            "metrics": metrics,
            "rigid": rigid,
            "relative": {
                "dissipated_pct": 100.0 * (dissipated - rigid_dissipated) / rigid_dissipated,
                "peak_pct": 100.0 * (metrics.peak_power - rigid.peak_power) / rigid.peak_power,
            },
            "limits": task.limits,
            "limits_satisfied": limits_ok,
            "profile": profile_summary,
            "metadata": metadata(started, Value::Null),
        }),
    )?;

    let mut exit_code = status_exit_code(sol.status);
    if exit_code == EXIT_OK && !matches!(profile, Some(Ok(_))) {
        exit_code = EXIT_SOLVER;
    }
    Ok(Outcome {
        exit_code,
        summary: format!(
            "design {}: {} after {} iterations, E = {:.4} J (joule {:.4}, viscous {:.4}), peak {:.1} W",
            task.name,
            sol.status,
            sol.iterations,
            metrics.breakdown.total,
            metrics.breakdown.joule,
            metrics.breakdown.viscous,
            metrics.peak_power
        ),
        files: out.files,
    })
}

pub fn sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let hash = cfg.hash();
    let task = cfg.resolve_task()?;
    let traj = &task.trajectory;
    let ops = build_operators(traj.n, traj.dt)?;
    let d = &cfg.design;
    let settings = SweepSettings {
        n_points: cfg.sweep.points,
        gamma1: d.gamma1,
        gamma2: d.gamma2,
        cost: d.cost,
        constraints: ConstraintOptions { limits: task.limits, mode: d.monotonicity, eps_strict: d.eps_strict },
        solver: cfg.solver.config(),
    };
    let curve = tradeoff_sweep(traj, &task.load, &task.motor, &ops, &settings)?;
    let mut out = Output::new(cfg)?;
    out.text("curve.csv", &csv_with_hash(&hash, &curve_csv(&curve)))?;
    if cfg.sweep.svg {
        let svg = curve_svg(&curve);
        let svg = match svg.find('\n') {
            Some(i) => format!("{}\n<!-- config_hash: {hash} -->{}", &svg[..i], &svg[i..]),
            None => svg,
        };
        out.text("curve.svg", &svg)?;
    }
    let last = curve.points.len() - 1;
    out.json(
        "report.json",
        &json!({
            "config_hash": hash,
            "task": task.name,
            "n": traj.n,
            "endpoints": [0, last],
            "knee": curve.knee,
            "rigid": curve.rigid,
            "points": curve.points,
            "metadata": metadata(started, json!({ "timings_s": curve.timings })),
        }),
    )?;
    let optimal = curve.points.iter().filter(|p| p.status == Status::Optimal.to_string()).count();
    let infeasible = curve.points.iter().filter(|p| p.status == Status::Infeasible.to_string()).count();
    let exit_code = if optimal == curve.points.len() {
        EXIT_OK
    } else if optimal == 0 && infeasible == curve.points.len() {
        EXIT_INFEASIBLE
    } else {
        EXIT_SOLVER
    };
    Ok(Outcome {
        exit_code,
        summary: format!("sweep {}: {optimal}/{} points optimal, knee at {:?}", task.name, curve.points.len(), curve.knee),
        files: out.files,
    })
}

pub fn baseline(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let hash = cfg.hash();
    let task = cfg.resolve_task()?;
    let traj = &task.trajectory;
    let p = task.motor;
    let ops = build_operators(traj.n, traj.dt)?;
    let rigid = rigid_baseline(traj, &task.load, &p, &ops)?;

    // second route: rectangle-rule quadrature of the rigid motor trajectory
    let tau = elastic_torque(traj, &task.load);
    let q_rigid: Vec<f64> = traj.q_l.iter().map(|q| p.r * q).collect();
    let tau_m = motor_torque(&q_rigid, &tau, &p, &ops)?;
    let quad = quadrature_energy(&q_rigid, &tau_m, traj.dt, p.k_m)?;
    let crosscheck = (quad.total - rigid.breakdown.total).abs() / rigid.breakdown.total.abs().max(1e-12);

    let objective = match cfg.baseline.objective {
        BaselineObjective::Energy => LinearObjective::Energy,
        BaselineObjective::Peak => LinearObjective::Peak,
        BaselineObjective::Blend => {
            LinearObjective::Blend { theta: cfg.design.theta, gamma1: cfg.design.gamma1, gamma2: cfg.design.gamma2 }
        }
    };
    let grid = default_stiffness_grid(traj, &task.load, cfg.baseline.points);
    let lin = linear_spring_baseline(traj, &task.load, &p, &ops, &grid, objective, &task.limits)?;
    let mut out = Output::new(cfg)?;
    out.json(
        "baseline.json",
        &json!({
            "config_hash": hash,
            "task": task.name,
            "n": traj.n,
            "limits": task.limits,
            "rigid": rigid,
            "rigid_feasible": rigid.within(&task.limits, 1e-6),
            "rigid_crosscheck": { "quadrature_total": quad.total, "relative_difference": crosscheck },
            "linear_feasible": lin.best.is_some(),
            "linear": to_value(&lin),
            "metadata": metadata(started, Value::Null),
        }),
    )?;
    let best = match &lin.best {
        Some(b) => match b.stiffness {
            Some(k) => format!("best linear k = {k:.4} N·m/rad, E = {:.4} J", b.metrics.breakdown.total),
            None => format!("best linear is the rigid limit, E = {:.4} J", b.metrics.breakdown.total),
        },
        None => "no feasible linear spring".to_string(),
    };
    Ok(Outcome {
        exit_code: EXIT_OK,
        summary: format!("baseline {}: rigid E = {:.4} J, peak {:.1} W; {best}", task.name, rigid.breakdown.total, rigid.peak_power),
        files: out.files,
    })
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    value: f64,
    tolerance: f64,
    detail: String,
}

pub fn validate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let hash = cfg.hash();
    let v = &cfg.validate;
    let solver = cfg.solver.config();
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    let mut failed = 0;
    for k in 0..v.planted {
        let seed = cfg.seed.wrapping_add(k as u64);
        let n = 6 + (k * 7) % 45;
        let pattern = match k % 5 {
            3 => ActivePattern::NoneActive,
            4 => ActivePattern::AllEquality,
            _ => ActivePattern::Mixed,
        };
        let flags = PlantFlags { pattern, quadratic: k % 2 == 0, equalities: k % 3 != 0 };
        let inst = plant_instance(n, seed, flags)?;
        let sol = seaspring_qcqp::solve(&inst.problem, None, &solver).map_err(|e| CliError::Solver(e.to_string()))?;
        let gap = (sol.objective - inst.objective_star).abs() / inst.objective_star.abs().max(1.0);
        worst = worst.max(gap);
        if !(gap <= v.planted_tol) {
            failed += 1;
        }
    }
    checks.push(Check {
        name: "planted-instances",
        pass: failed == 0 && v.planted > 0,
        value: worst,
        tolerance: v.planted_tol,
        detail: format!("{failed} of {} instances above tolerance", v.planted),
    });

    let task = cfg.resolve_task()?;
    let traj = &task.trajectory;
    let ops = build_operators(traj.n, traj.dt)?;
    let cost = assemble_energy_cost(traj, &task.load, &task.motor, &ops)?;
    let q: Vec<f64> = (0..traj.n)
        .map(|i| task.motor.r * traj.q_l[i] + 0.1 * (2.0 * std::f64::consts::PI * 3.0 * i as f64 / traj.n as f64).sin())
        .collect();
    // the cost is quadratic, so central differences are exact up to rounding
    // and a large step keeps that rounding small
    let grad_err = finite_diff_gradient_check(|x| cost.evaluate(x), |x| cost.gradient(x), &q, 1e-2);
    checks.push(Check {
        name: "energy-gradient",
        pass: grad_err <= v.gradient_tol,
        value: grad_err,
        tolerance: v.gradient_tol,
        detail: format!("central differences on the {} task", task.name),
    });

    let d_study = derivative_order_study(32, 4)?;
    checks.push(Check {
        name: "derivative-order",
        pass: (d_study.order - 2.0).abs() <= v.order_tol,
        value: d_study.order,
        tolerance: v.order_tol,
        detail: format!("errors {:?}", d_study.errors),
    });
    let e_study = energy_identity_order_study(&task.motor, 32, 4)?;
    checks.push(Check {
        name: "energy-identity-order",
        pass: (e_study.order - 2.0).abs() <= v.order_tol,
        value: e_study.order,
        tolerance: v.order_tol,
        detail: format!("residuals {:?}", e_study.errors),
    });

    let pass = checks.iter().all(|c| c.pass);
    let mut out = Output::new(cfg)?;
    out.json(
        "validation.json",
        &json!({
            "config_hash": hash,
            "pass": pass,
            "checks": checks,
            "metadata": metadata(started, Value::Null),
        }),
    )?;
    let summary = checks
        .iter()
        .map(|c| format!("{} {}: {:.3e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Outcome { exit_code: if pass { EXIT_OK } else { EXIT_SOLVER }, summary, files: out.files })
}

/// Strips the `metadata` field so two runs can be compared byte for byte.
pub fn without_metadata(json_text: &str) -> Result<String, CliError> {
    let mut v: Value = serde_json::from_str(json_text).map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("metadata");
    }
    Ok(serde_json::to_string(&v).expect("serializable"))
}

/// Default output location for a command when none is configured.
pub fn default_output_dir(command: &str, cfg: &RunConfig) -> PathBuf {
    Path::new("out").join(format!("{command}-{}", cfg.task.name))
}
