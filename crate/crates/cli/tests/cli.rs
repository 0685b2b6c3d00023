use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use seaspring_cli::commands::without_metadata;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seaspring"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn data_rows(csv: &str) -> usize {
    csv.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).count() - 1
}

fn config_hash(dir: &Path, json_name: &str) -> String {
    let text = fs::read_to_string(dir.join(json_name)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["config_hash"].as_str().unwrap().to_string()
}

fn assert_hash_everywhere(dir: &Path, hash: &str) {
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            let text = fs::read_to_string(&path).unwrap();
            assert!(text.contains(hash), "{} lacks the config hash", path.display());
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn generate_cubic_writes_the_requested_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["generate-cubic", "--n", "257"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("cubic_trajectory.csv")).unwrap();
    assert_eq!(data_rows(&csv), 257);
    let hash = config_hash(tmp.path(), "cubic_trajectory.json");
    assert_hash_everywhere(tmp.path(), &hash);
}

#[test]
fn zero_release_angle_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["generate-cubic", "--q0", "0"], tmp.path());
    assert_eq!(code(&o), 4);
    assert!(!o.stderr.is_empty());
}

#[test]
fn bad_inputs_exit_with_code_four() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["design", "--task", "swimming"], tmp.path())), 4);
    assert_eq!(code(&run(&["design", "--config", "/nonexistent/run.toml"], tmp.path())), 4);
    assert_eq!(code(&run(&["design", "--task", "walking", "--theta", "1.5"], tmp.path())), 4);
}

#[test]
fn design_writes_trajectory_profile_and_solution() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["design", "--task", "walking", "--n", "80"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["motor_trajectory.csv", "profile.csv", "solution.json"] {
        assert!(tmp.path().join(f).is_file(), "{f} missing");
    }
    let csv = fs::read_to_string(tmp.path().join("motor_trajectory.csv")).unwrap();
    assert_eq!(data_rows(&csv), 80);
    let hash = config_hash(tmp.path(), "solution.json");
    assert_hash_everywhere(tmp.path(), &hash);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("optimal"), "{stdout}");
}

#[test]
fn impossible_torque_limit_exits_infeasible() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["design", "--task", "running", "--n", "66", "--tau-max", "1.0"], tmp.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("solution.json")).unwrap()).unwrap();
    assert_eq!(v["status"], "infeasible");
    assert!(!v["witness"].is_null());
}

#[test]
fn sweep_honours_the_point_count() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["sweep", "--task", "walking", "--n", "60", "--points", "5"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("curve.csv")).unwrap();
    assert_eq!(data_rows(&csv), 5);
    let hash = config_hash(tmp.path(), "report.json");
    assert_hash_everywhere(tmp.path(), &hash);
}

#[test]
fn baseline_reports_rigid_and_linear() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["baseline", "--task", "walking", "--n", "60"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let hash = config_hash(tmp.path(), "baseline.json");
    assert_hash_everywhere(tmp.path(), &hash);
}

#[test]
fn validate_passes_and_a_zero_tolerance_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["validate", "--task", "walking", "--n", "60", "--planted", "20"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let o = run(&["validate", "--task", "walking", "--n", "60", "--planted", "20", "--planted-tol", "0"], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL planted-instances"));
}

#[test]
fn repeated_runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["design", "--task", "walking", "--n", "60", "--theta", "0.5"];
    assert_eq!(code(&run(&args, a.path())), 0);
    assert_eq!(code(&run(&args, b.path())), 0);
    for f in ["motor_trajectory.csv", "profile.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
    let ja = without_metadata(&fs::read_to_string(a.path().join("solution.json")).unwrap()).unwrap();
    let jb = without_metadata(&fs::read_to_string(b.path().join("solution.json")).unwrap()).unwrap();
    assert_eq!(ja, jb);
}

#[test]
fn output_directory_does_not_change_the_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&["generate-cubic", "--n", "64"], a.path());
    run(&["generate-cubic", "--n", "64"], b.path());
    assert_eq!(config_hash(a.path(), "cubic_trajectory.json"), config_hash(b.path(), "cubic_trajectory.json"));
    let c = tempfile::tempdir().unwrap();
    run(&["generate-cubic", "--n", "65"], c.path());
    assert_ne!(config_hash(a.path(), "cubic_trajectory.json"), config_hash(c.path(), "cubic_trajectory.json"));
}
