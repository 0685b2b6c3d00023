use std::f64::consts::PI;
use std::io::Write;

use proptest::prelude::*;

use seaspring_core::discretization::build_operators;
use seaspring_core::fixtures::GaitShape;
use seaspring_core::trajectory::{
    concatenate_tasks, generate_cubic_oscillation, generate_cubic_oscillation_with, load_trajectory,
    load_trajectory_with, resample_periodic, ColumnMap, CubicOptions, CubicSpringSystem, Trajectory,
};
use seaspring_core::Error;

/// `∫₀¹ (1 - u⁴)^(-1/2) du = Γ(1/4)² / (4 √(2π))`.
const QUARTIC_INTEGRAL: f64 = 1.311_028_777_146_059_9;

fn write_csv(lines: &[String]) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
    for l in lines {
        writeln!(f, "{l}").unwrap();
    }
    f.flush().unwrap();
    f
}

fn sine_csv(n: usize, period: f64) -> tempfile::NamedTempFile {
    let dt = period / n as f64;
    let mut lines = vec!["time,q_l,tau_ext".to_string()];
    for i in 0..n {
        let t = i as f64 * dt;
        lines.push(format!("{t:?},{:?},0.0", (2.0 * PI * t / period).sin()));
    }
    write_csv(&lines)
}

fn sine_trajectory(n: usize, period: f64) -> Trajectory {
    let dt = period / n as f64;
    let q: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 * dt / period).sin()).collect();
    let tau: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 * dt / period).cos()).collect();
    Trajectory::from_positions(q, tau, dt, "sine").unwrap()
}

#[test]
fn constant_position_file_has_zero_derivatives() {
    let f = write_csv(&["time,q_l,tau_ext".into(), "0,1,0".into(), "0.1,1,0".into(), "0.2,1,0".into(), "0.3,1,0".into()]);
    let t = load_trajectory(f.path(), &ColumnMap::default()).unwrap();
    assert_eq!(t.n, 4);
    assert!(t.dq_l.iter().chain(&t.ddq_l).all(|&v| v == 0.0));
}

#[test]
fn synthesized_velocity_of_sine_file_converges_at_second_order() {
    let period = 1.3;
    let omega = 2.0 * PI / period;
    let err = |n: usize| {
        let f = sine_csv(n, period);
        let t = load_trajectory(f.path(), &ColumnMap::default()).unwrap();
        t.times()
            .iter()
            .zip(&t.dq_l)
            .map(|(time, dq)| (dq - omega * (omega * time).cos()).abs())
            .fold(0.0f64, f64::max)
    };
    let (e256, e512) = (err(256), err(512));
    // leading error term of the central difference: ω³ Δt² / 6
    let dt = period / 256.0;
    assert!(e256 <= 1.01 * omega.powi(3) * dt * dt / 6.0, "{e256}");
    let ratio = e256 / e512;
    assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn nan_torque_entry_is_rejected() {
    let f = write_csv(&["time,q_l,tau_ext".into(), "0,0,0".into(), "1,1,NaN".into(), "2,0,0".into(), "3,1,0".into()]);
    let err = load_trajectory(f.path(), &ColumnMap::default()).unwrap_err();
    assert!(matches!(err, Error::NanEntry { ref column, row: 1 } if column == "tau_ext"), "{err}");
    assert!(err.to_string().contains("NaN entries"));
}

#[test]
fn malformed_files_are_rejected() {
    let missing = write_csv(&["time,q_l".into(), "0,0".into(), "1,1".into(), "2,0".into(), "3,1".into()]);
    assert!(matches!(load_trajectory(missing.path(), &ColumnMap::default()), Err(Error::MissingColumn(_))));
    let short = write_csv(&["time,q_l,tau_ext".into(), "0,0,0".into(), "1,1,0".into(), "2,0,0".into()]);
    assert!(matches!(load_trajectory(short.path(), &ColumnMap::default()), Err(Error::TooFewSamples { .. })));
    let back = write_csv(&["time,q_l,tau_ext".into(), "0,0,0".into(), "2,1,0".into(), "1,0,0".into(), "3,1,0".into()]);
    assert!(matches!(load_trajectory(back.path(), &ColumnMap::default()), Err(Error::NonMonotoneTime(2))));
}

#[test]
fn non_uniform_time_needs_a_resample_request() {
    let mut lines = vec!["time,q_l,tau_ext".to_string()];
    let times = [0.0, 0.1, 0.25, 0.3, 0.42, 0.5, 0.61, 0.7];
    for t in times {
        lines.push(format!("{t},{:?},{:?}", (2.0 * PI * t / 0.8).sin(), (2.0 * PI * t / 0.8).cos()));
    }
    let f = write_csv(&lines);
    assert!(matches!(load_trajectory(f.path(), &ColumnMap::default()), Err(Error::NonUniformTime { .. })));
    let t = load_trajectory_with(f.path(), &ColumnMap::default(), Some(16)).unwrap();
    assert_eq!(t.n, 16);
    assert!((t.period() - 0.8).abs() < 1e-12);
}

#[test]
fn written_csv_round_trips() {
    let t = sine_trajectory(32, 0.7);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("sine.csv");
    t.write_csv(&p).unwrap();
    let back = load_trajectory(&p, &ColumnMap::default()).unwrap();
    assert_eq!(back.q_l, t.q_l);
    assert_eq!(back.dq_l, t.dq_l);
    assert_eq!(back.ddq_l, t.ddq_l);
    assert_eq!(back.tau_ext, t.tau_ext);
    assert!((back.dt - t.dt).abs() < 1e-15);
}

#[test]
fn cubic_release_energy_is_conserved() {
    let osc = generate_cubic_oscillation(&CubicSpringSystem::default(), 501).unwrap();
    let e0 = 40.0 * (PI / 2.0).powi(4) / 4.0;
    assert!((osc.energy0 - e0).abs() < 1e-12 * e0);
    assert!((e0 - 60.88).abs() < 0.01);
    assert!(osc.energy_drift < 1e-6, "{}", osc.energy_drift);
}

#[test]
fn cubic_period_matches_quadrature_and_step_halving() {
    let sys = CubicSpringSystem::default();
    let analytic = 4.0 / sys.q0 * (2.0 * sys.i_l / sys.alpha).sqrt() * QUARTIC_INTEGRAL;
    let coarse = generate_cubic_oscillation_with(&sys, 501, &CubicOptions { oversample: 8, ..Default::default() }).unwrap();
    let fine = generate_cubic_oscillation_with(&sys, 501, &CubicOptions { oversample: 16, ..Default::default() }).unwrap();
    assert!((coarse.period - fine.period).abs() <= 1e-6 * fine.period);
    assert!((fine.period - analytic).abs() <= 1e-6 * analytic, "{} vs {analytic}", fine.period);
    // hundreds of milliseconds
    assert!(fine.period > 0.1 && fine.period < 1.0);
    assert!((fine.trajectory.period() - fine.period).abs() < 1e-12);
}

#[test]
fn cubic_energy_drift_is_fourth_order() {
    let sys = CubicSpringSystem::default();
    let drift = |oversample: usize| {
        let opts = CubicOptions { oversample, drift_tol: 1.0, ..Default::default() };
        generate_cubic_oscillation_with(&sys, 32, &opts).unwrap().energy_drift
    };
    let (d8, d16) = (drift(8), drift(16));
    let ratio = d8 / d16;
    assert!(ratio > 12.0 && ratio < 20.0, "drift {d8:e} -> {d16:e}, ratio {ratio}");
}

#[test]
fn degenerate_release_is_an_error() {
    let sys = CubicSpringSystem { q0: 0.0, ..Default::default() };
    assert!(matches!(generate_cubic_oscillation(&sys, 128), Err(Error::DegenerateOscillation)));
}

#[test]
fn generated_orbit_closes_under_the_difference_operator() {
    let osc = generate_cubic_oscillation(&CubicSpringSystem::default(), 501).unwrap();
    let t = &osc.trajectory;
    assert!(t.closure_error() < 1e-6);
    let ops = build_operators(t.n, t.dt).unwrap();
    assert_eq!(ops.apply_d2(&t.q_l), t.ddq_l);
}

#[test]
fn resample_to_same_grid_is_identity() {
    let t = sine_trajectory(100, 1.0);
    let r = resample_periodic(&t, 100).unwrap();
    for (a, b) in t.q_l.iter().zip(&r.q_l) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn resampled_sine_stays_within_interpolation_tolerance() {
    let t = sine_trajectory(128, 1.0);
    let r = resample_periodic(&t, 256).unwrap();
    assert_eq!(r.n, 256);
    let worst = r
        .times()
        .iter()
        .zip(&r.q_l)
        .map(|(time, q)| (q - (2.0 * PI * time).sin()).abs())
        .fold(0.0f64, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn resample_below_four_points_is_an_error() {
    let t = sine_trajectory(16, 1.0);
    assert!(matches!(resample_periodic(&t, 2), Err(Error::TooFewSamples { .. })));
}

#[test]
fn four_walks_and_one_run_concatenate_in_order() {
    let dt = 0.01;
    let walk = GaitShape::walking().trajectory(114, "walk").unwrap();
    let run = GaitShape::running().trajectory(66, "run").unwrap();
    assert!((walk.dt - dt).abs() < 1e-15 && (run.dt - dt).abs() < 1e-15);
    let cat = concatenate_tasks(&[(walk.clone(), 4), (run.clone(), 1)], None).unwrap();
    let t = &cat.trajectory;
    assert_eq!(t.n, 4 * walk.n + run.n);
    assert!((t.period() - (4.0 * walk.period() + run.period())).abs() < 1e-12);
    assert_eq!(&t.q_l[3 * walk.n..4 * walk.n], &walk.q_l[..]);
    assert_eq!(&t.q_l[4 * walk.n..], &run.q_l[..]);
    assert_eq!(cat.gaps.len(), 5);
    assert_eq!(t.label, "walkx4+runx1");
}

#[test]
fn single_part_is_returned_unchanged() {
    let t = sine_trajectory(40, 1.0);
    let cat = concatenate_tasks(&[(t.clone(), 1)], None).unwrap();
    assert_eq!(cat.trajectory, t);
}

#[test]
fn mismatched_dt_needs_a_common_grid() {
    let a = sine_trajectory(40, 1.0);
    let b = sine_trajectory(30, 1.0);
    assert!(matches!(concatenate_tasks(&[(a.clone(), 1), (b.clone(), 1)], None), Err(Error::IncompatibleDt(..))));
    let cat = concatenate_tasks(&[(a, 2), (b, 1)], Some(0.02)).unwrap();
    assert_eq!(cat.trajectory.n, 150);
    assert!((cat.trajectory.period() - 3.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn concatenation_preserves_total_duration(n1 in 4usize..60, n2 in 4usize..60, r1 in 1usize..5, r2 in 0usize..4) {
        let dt = 0.005;
        let a = Trajectory::from_positions((0..n1).map(|i| (i as f64).sin()).collect(), vec![0.0; n1], dt, "a").unwrap();
        let b = Trajectory::from_positions((0..n2).map(|i| (i as f64).cos()).collect(), vec![1.0; n2], dt, "b").unwrap();
        let cat = concatenate_tasks(&[(a, r1), (b, r2)], None).unwrap();
        prop_assert_eq!(cat.trajectory.n, n1 * r1 + n2 * r2);
        let parts = (n1 * r1) as f64 * dt + (n2 * r2) as f64 * dt;
        prop_assert!((cat.trajectory.period() - parts).abs() <= 1e-12 * parts);
    }

    #[test]
    fn synthesized_trajectories_close_exactly(seed in proptest::collection::vec(-1.0f64..1.0, 4..80)) {
        let n = seed.len();
        let t = Trajectory::from_positions(seed, vec![0.0; n], 0.01, "r").unwrap();
        prop_assert!(t.closure_error() <= 1e-12);
    }
}
