use proptest::prelude::*;

use seaspring_core::discretization::{build_operators, elastic_torque, elongation};
use seaspring_core::error::Error;
use seaspring_core::fixtures::cubic_task;
use seaspring_core::problem::{assemble_instance, CostSelection, DesignSettings};
use seaspring_core::solver::{solve, SolverConfig};
use seaspring_core::spring::{
    build_profile, build_profile_with, export_profile, import_profile, Provenance, DEFAULT_TOL_MERGE,
};

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn viscous_only_cubic_design_recovers_the_cubic_spring() {
    let task = cubic_task(201).unwrap();
    let t = &task.trajectory;
    let ops = build_operators(t.n, t.dt).unwrap();
    let settings = DesignSettings { cost: CostSelection::ViscousOnly, ..Default::default() };
    let inst = assemble_instance(t, &task.load, &task.motor, &ops, &settings).unwrap();
    let sol = solve(&inst, &SolverConfig::default()).unwrap();
    assert!(sol.is_optimal());
    let delta = elongation(&sol.q_m, &t.q_l, task.motor.r).unwrap();
    let tau = elastic_torque(t, &task.load);
    let prof = build_profile(&delta, &tau, DEFAULT_TOL_MERGE).unwrap();
    let c = prof.cubic_coefficient();
    assert!((c - 40.0).abs() < 0.4, "cubic coefficient {c}");
}

#[test]
fn rigid_elongation_is_a_degenerate_profile() {
    let tau = linspace(-10.0, 10.0, 20);
    let err = build_profile(&[0.0; 20], &tau, DEFAULT_TOL_MERGE).unwrap_err();
    assert!(matches!(err, Error::ConflictingTorque { .. } | Error::DegenerateProfile(_)), "{err:?}");
    let err = build_profile(&[0.0; 20], &[1.0; 20], DEFAULT_TOL_MERGE).unwrap_err();
    assert!(matches!(err, Error::DegenerateProfile(_)), "{err:?}");
}

#[test]
fn empty_and_mismatched_inputs_are_rejected() {
    assert!(matches!(build_profile(&[], &[], 1e-6), Err(Error::DegenerateProfile(_))));
    assert!(matches!(build_profile(&[0.0, 1.0], &[0.0], 1e-6), Err(Error::Dimension(_))));
    assert!(build_profile(&[0.0, f64::NAN], &[0.0, 1.0], 1e-6).is_err());
}

#[test]
fn linear_samples_give_an_exact_linear_spring() {
    let k = 250.0;
    let d = linspace(-0.2, 0.3, 11);
    let tau: Vec<f64> = d.iter().map(|x| k * x).collect();
    let prof = build_profile(&d, &tau, DEFAULT_TOL_MERGE).unwrap();
    for x in linspace(-0.2, 0.3, 97) {
        assert!((prof.evaluate(x).value - k * x).abs() < 1e-10);
        assert!((prof.stiffness(x).value - k).abs() < 1e-8);
    }
    assert!((prof.work(-0.1, 0.25) - 0.5 * k * (0.25f64.powi(2) - 0.01)).abs() < 1e-10);
}

#[test]
fn cubic_samples_interpolate_within_tolerance() {
    let d = linspace(-1.0, 1.0, 101);
    let tau: Vec<f64> = d.iter().map(|x| 40.0 * x.powi(3)).collect();
    let prof = build_profile(&d, &tau, DEFAULT_TOL_MERGE).unwrap();
    for w in d.windows(2) {
        let m = 0.5 * (w[0] + w[1]);
        let e = (prof.evaluate(m).value - 40.0 * m.powi(3)).abs();
        assert!(e < 1e-3 * 40.0, "midpoint {m}: {e}");
    }
    assert!((prof.cubic_coefficient() - 40.0).abs() < 1e-12);
}

#[test]
fn queries_outside_the_range_are_flagged() {
    let d = linspace(0.0, 1.0, 5);
    let tau: Vec<f64> = d.iter().map(|x| x + x * x).collect();
    let prof = build_profile(&d, &tau, DEFAULT_TOL_MERGE).unwrap();
    assert!(!prof.evaluate(0.5).extrapolated);
    assert!(!prof.evaluate(1.0).extrapolated);
    let below = prof.evaluate(-0.1);
    let above = prof.evaluate(1.2);
    assert!(below.extrapolated && above.extrapolated);
    assert!(prof.stiffness(2.0).extrapolated);
    // linear continuation at the boundary stiffness
    assert!((above.value - (2.0 + prof.slopes[4] * 0.2)).abs() < 1e-12);
    assert!(below.value < tau[0] && above.value > tau[4]);
}

#[test]
fn near_duplicates_merge_and_conflicts_are_errors() {
    let d = [0.0, 0.5, 0.5 + 1e-9, 1.0];
    let tau = [0.0, 2.0, 2.0, 5.0];
    let prof = build_profile(&d, &tau, DEFAULT_TOL_MERGE).unwrap();
    assert_eq!(prof.len(), 3);
    let err = build_profile(&[0.0, 0.5, 0.5, 1.0], &[0.0, 1.0, 3.0, 5.0], DEFAULT_TOL_MERGE).unwrap_err();
    assert!(matches!(err, Error::ConflictingTorque { .. }), "{err:?}");
    let err = build_profile(&[0.0, 0.4, 1.0], &[0.0, 3.0, 2.0], DEFAULT_TOL_MERGE).unwrap_err();
    assert!(matches!(err, Error::NonMonotoneProfile { .. }), "{err:?}");
}

#[test]
fn export_import_round_trip() {
    let d = linspace(-0.3, 0.4, 17);
    let tau: Vec<f64> = d.iter().map(|x| 3.0 * x + 40.0 * x.powi(3)).collect();
    let src = Provenance { label: "walking".into(), theta: Some(0.25), hash: "abc123".into() };
    let prof = build_profile_with(&d, &tau, DEFAULT_TOL_MERGE, src).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("profile.csv");
    export_profile(&prof, &path).unwrap();
    let back = import_profile(&path).unwrap();
    assert_eq!(back.delta, prof.delta);
    assert_eq!(back.tau, prof.tau);
    assert_eq!(back.source, prof.source);
    for x in linspace(-0.35, 0.45, 40) {
        assert_eq!(back.evaluate(x), prof.evaluate(x));
    }
}

#[test]
fn malformed_imports_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let cases = [
        ("empty.csv", "delta,tau\n"),
        ("nonmono.csv", "delta,tau\n0.0,0.0\n0.1,2.0\n0.2,1.0\n"),
        ("header.csv", "x,y\n0,0\n1,1\n"),
        ("text.csv", "delta,tau\n0.0,abc\n0.1,1.0\n"),
        ("missing.csv", "delta,tau\n0.0\n0.1,1.0\n"),
    ];
    for (name, text) in cases {
        assert!(import_profile(write(name, text)).is_err(), "{name} accepted");
    }
    assert!(import_profile(dir.path().join("absent.csv")).is_err());
}

fn monotone_samples() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..30).prop_flat_map(|n| {
        (prop::collection::vec(1e-3f64..1.0, n), prop::collection::vec(1e-3f64..100.0, n)).prop_map(|(dx, dy)| {
            let mut d = Vec::with_capacity(dx.len());
            let mut t = Vec::with_capacity(dy.len());
            let (mut x, mut y) = (-0.5, -10.0);
            for (a, b) in dx.iter().zip(&dy) {
                x += a;
                y += b;
                d.push(x);
                t.push(y);
            }
            (d, t)
        })
    })
}

proptest! {
    #[test]
    fn stiffness_stays_nonnegative_and_torque_monotone((d, t) in monotone_samples(), u in prop::collection::vec(0.0f64..1.0, 1000)) {
        let prof = build_profile(&d, &t, DEFAULT_TOL_MERGE).unwrap();
        let (lo, hi) = prof.range();
        let mut xs: Vec<f64> = u.iter().map(|s| lo + s * (hi - lo)).collect();
        xs.sort_by(f64::total_cmp);
        let scale = t.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut prev = f64::NEG_INFINITY;
        for x in xs {
            prop_assert!(prof.stiffness(x).value >= 0.0);
            let v = prof.evaluate(x).value;
            prop_assert!(v >= prev - 1e-12 * scale);
            prev = v;
        }
    }

    #[test]
    fn interpolant_passes_through_the_samples((d, t) in monotone_samples()) {
        let prof = build_profile(&d, &t, DEFAULT_TOL_MERGE).unwrap();
        for (x, y) in d.iter().zip(&t) {
            prop_assert!((prof.evaluate(*x).value - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn work_is_additive_and_antisymmetric((d, t) in monotone_samples(), a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
        let prof = build_profile(&d, &t, DEFAULT_TOL_MERGE).unwrap();
        let (lo, hi) = prof.range();
        let at = |s: f64| lo + s * (hi - lo);
        let (a, b, c) = (at(a), at(b), at(c));
        let scale = t.iter().fold(1.0f64, |m, v| m.max(v.abs())) * (hi - lo);
        prop_assert!((prof.work(a, b) + prof.work(b, c) - prof.work(a, c)).abs() <= 1e-9 * scale);
        prop_assert!((prof.work(a, b) + prof.work(b, a)).abs() <= 1e-12 * scale);
    }
}
