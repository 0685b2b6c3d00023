//! Run configuration: a TOML file, `--set key=value` overrides and a few
//! typed shortcuts, resolved against the bundled task defaults.
//!
//! ```toml
//! seed = 0
//! n = 501
//! output_dir = "out/cubic"
//!
//! [task]
//! name = "cubic"            # cubic | walking | running | file
//! files = [{ path = "walk.csv", repeat = 4 }, { path = "run.csv", repeat = 1 }]
//!
//! [motor]
//! preset = "ilm85x26"       # omit to use the task's motor
//! eta = 1.0                 # any field overrides the base
//!
//! [load]
//! mode = "inertial-viscous" # or "direct-torque"
//! i_l = 0.125
//!
//! [design]
//! theta = 1.0
//! cost = "total"            # total | joule-only | viscous-only
//!
//! [limits]
//! tau_max = true            # true = motor value, false = off, number = value
//! dq_max = false
//! delta_max = 0.4
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use seaspring_core::discretization::{LoadMode, LoadModel, MotorParams};
use seaspring_core::fixtures::{self, Task};
use seaspring_core::problem::{CostSelection, Limits, MonotonicityMode, DEFAULT_GAMMA1, DEFAULT_GAMMA2};
use seaspring_core::solver::SolverConfig;
use seaspring_core::trajectory::{
    concatenate_tasks, generate_cubic_oscillation, load_trajectory_with, resample_periodic, ColumnMap,
    CubicSpringSystem,
};

use crate::CliError;

pub const DEFAULT_N: usize = 501;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Grid size; `None` keeps the task's own sampling (501 for bundled tasks).
    pub n: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub task: TaskSection,
    pub cubic: CubicSection,
    pub motor: MotorSection,
    pub load: Option<LoadSection>,
    pub design: DesignSection,
    pub limits: LimitsSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub baseline: BaselineSection,
    pub validate: ValidateSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    pub name: String,
    pub files: Vec<TaskFile>,
    pub columns: ColumnMap,
    /// Common sample interval for parts recorded at different rates.
    pub common_dt: Option<f64>,
}

impl Default for TaskSection {
    fn default() -> Self {
        TaskSection { name: "cubic".into(), files: Vec::new(), columns: ColumnMap::default(), common_dt: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    pub path: PathBuf,
    #[serde(default = "one")]
    pub repeat: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CubicSection {
    pub alpha: f64,
    pub i_l: f64,
    pub q0: f64,
}

impl Default for CubicSection {
    fn default() -> Self {
        let s = CubicSpringSystem::default();
        CubicSection { alpha: s.alpha, i_l: s.i_l, q0: s.q0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotorSection {
    pub preset: Option<String>,
    pub k_t: Option<f64>,
    pub resistance: Option<f64>,
    pub i_m: Option<f64>,
    pub b_m: Option<f64>,
    pub r: Option<f64>,
    pub eta: Option<f64>,
    pub tau_max: Option<f64>,
    pub dq_max: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSection {
    pub mode: LoadMode,
    #[serde(default)]
    pub i_l: f64,
    #[serde(default)]
    pub b_l: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSection {
    pub theta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub cost: CostSelection,
    pub monotonicity: MonotonicityMode,
    pub eps_strict: Option<f64>,
    pub tol_merge: f64,
}

impl Default for DesignSection {
    fn default() -> Self {
        DesignSection {
            theta: 1.0,
            gamma1: DEFAULT_GAMMA1,
            gamma2: DEFAULT_GAMMA2,
            cost: CostSelection::Total,
            monotonicity: MonotonicityMode::default(),
            eps_strict: None,
            tol_merge: seaspring_core::spring::DEFAULT_TOL_MERGE,
        }
    }
}

/// `true` takes the motor's value, `false` drops the limit, a number sets it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Toggle {
    Flag(bool),
    Value(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsSection {
    pub tau_max: Option<Toggle>,
    pub dq_max: Option<Toggle>,
    /// `false` drops a task's elongation bound; a number sets it.
    pub delta_max: Option<Toggle>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
    pub regularization: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = SolverConfig::default();
        SolverSection { tol_gap: c.tol_gap, tol_feas: c.tol_feas, max_iter: c.max_iter, regularization: c.regularization }
    }
}

impl SolverSection {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            tol_gap: self.tol_gap,
            tol_feas: self.tol_feas,
            max_iter: self.max_iter,
            regularization: self.regularization,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub points: usize,
    pub svg: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { points: 30, svg: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineObjective {
    Energy,
    Peak,
    Blend,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub points: usize,
    pub objective: BaselineObjective,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection { points: 241, objective: BaselineObjective::Energy }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub planted: usize,
    pub planted_tol: f64,
    pub gradient_tol: f64,
    /// Allowed deviation of measured convergence orders from 2.
    pub order_tol: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        ValidateSection { planted: 100, planted_tol: 1e-6, gradient_tol: 1e-6, order_tol: 0.2 }
    }
}

/// Sets `dotted.key = value` in a TOML table, parsing `value` as TOML and
/// falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Input(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = parse_value(raw);
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Input(format!("bad override key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Input(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl RunConfig {
    /// Reads an optional file and applies overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Input(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: RunConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Input(e.to_string()))?;
        // task files are relative to the config file
        if let Some(dir) = path.and_then(Path::parent) {
            for f in &mut cfg.task.files {
                if f.path.is_relative() {
                    f.path = dir.join(&f.path);
                }
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let d = &self.design;
        if !(0.0..=1.0).contains(&d.theta) {
            return Err(CliError::Input(format!("theta must lie in [0, 1], got {}", d.theta)));
        }
        if !(d.gamma1 >= 0.0 && d.gamma2 > 0.0) {
            return Err(CliError::Input("gamma1 must be nonnegative and gamma2 positive".into()));
        }
        if let Some(n) = self.n {
            if n < 4 {
                return Err(CliError::Input(format!("n must be at least 4, got {n}")));
            }
        }
        if self.sweep.points < 2 {
            return Err(CliError::Input("sweep needs at least 2 points".into()));
        }
        if self.task.name == "file" && self.task.files.is_empty() {
            return Err(CliError::Input("task `file` needs at least one entry in task.files".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn cubic_system(&self) -> CubicSpringSystem {
        CubicSpringSystem { alpha: self.cubic.alpha, i_l: self.cubic.i_l, q0: self.cubic.q0 }
    }

    pub fn grid(&self) -> usize {
        self.n.unwrap_or(DEFAULT_N)
    }

    /// The task with motor, load and limit overrides applied.
    pub fn resolve_task(&self) -> Result<Task, CliError> {
        let n = self.grid();
        let mut task = match self.task.name.as_str() {
            "cubic" => {
                let sys = self.cubic_system();
                Task {
                    name: "cubic".into(),
                    trajectory: generate_cubic_oscillation(&sys, n)?.trajectory,
                    load: LoadModel::inertial(sys.i_l, 0.0),
                    motor: fixtures::cubic_motor(),
                    limits: Limits::none(),
                }
            }
            "file" => {
                let mut parts = Vec::with_capacity(self.task.files.len());
                for f in &self.task.files {
                    parts.push((load_trajectory_with(&f.path, &self.task.columns, None)?, f.repeat));
                }
                let cat = concatenate_tasks(&parts, self.task.common_dt)?;
                let traj = match self.n {
                    Some(n) => resample_periodic(&cat.trajectory, n)?,
                    None => cat.trajectory,
                };
                Task {
                    name: "file".into(),
                    trajectory: traj,
                    load: LoadModel::direct_torque(),
                    motor: MotorParams::ilm85x26(),
                    limits: Limits::none(),
                }
            }
            name => fixtures::task_by_name(name, n)
                .ok_or_else(|| CliError::Input(format!("unknown task `{name}` (cubic, walking, running, file)")))??,
        };
        task.motor = self.resolve_motor(task.motor)?;
        if let Some(l) = self.load {
            task.load = LoadModel { mode: l.mode, i_l: l.i_l, b_l: l.b_l };
            task.load.validate()?;
        }
        task.limits = self.resolve_limits(task.limits, &task.motor)?;
        Ok(task)
    }

    fn resolve_motor(&self, base: MotorParams) -> Result<MotorParams, CliError> {
        let m = &self.motor;
        let base = match m.preset.as_deref() {
            None => base,
            Some("ilm85x26") => MotorParams::ilm85x26(),
            Some(other) => return Err(CliError::Input(format!("unknown motor preset `{other}`"))),
        };
        Ok(MotorParams::new(
            m.k_t.unwrap_or(base.k_t),
            m.resistance.unwrap_or(base.resistance),
            m.i_m.unwrap_or(base.i_m),
            m.b_m.unwrap_or(base.b_m),
            m.r.unwrap_or(base.r),
            m.eta.unwrap_or(base.eta),
            m.tau_max.unwrap_or(base.tau_max),
            m.dq_max.unwrap_or(base.dq_max),
        )?)
    }

    fn resolve_limits(&self, base: Limits, motor: &MotorParams) -> Result<Limits, CliError> {
        let pick = |t: Option<Toggle>, current: Option<f64>, motor_value: Option<f64>, name: &str| match t {
            None => Ok(current),
            Some(Toggle::Flag(false)) => Ok(None),
            Some(Toggle::Flag(true)) => {
                motor_value.or(current).map(Some).ok_or_else(|| CliError::Input(format!("{name} = true needs a value")))
            }
            Some(Toggle::Value(v)) if v > 0.0 && v.is_finite() => Ok(Some(v)),
            Some(Toggle::Value(v)) => Err(CliError::Input(format!("{name} must be positive, got {v}"))),
        };
        Ok(Limits {
            tau_max: pick(self.limits.tau_max, base.tau_max, Some(motor.tau_max), "tau_max")?,
            dq_max: pick(self.limits.dq_max, base.dq_max, Some(motor.dq_max), "dq_max")?,
            delta_max: pick(self.limits.delta_max, base.delta_max, None, "delta_max")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_nested_tables() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "design.theta = 0.5").unwrap();
        apply_override(&mut t, "task.name=walking").unwrap();
        apply_override(&mut t, "limits.tau_max=false").unwrap();
        let cfg: RunConfig = toml::Value::Table(t).try_into().unwrap();
        assert_eq!(cfg.design.theta, 0.5);
        assert_eq!(cfg.task.name, "walking");
        assert_eq!(cfg.limits.tau_max, Some(Toggle::Flag(false)));
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.design.theta = 0.9;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "design.thetta=0.5").unwrap();
        assert!(toml::Value::Table(t).try_into::<RunConfig>().is_err());
    }

    #[test]
    fn limit_toggles_resolve_against_motor() {
        let mut cfg = RunConfig::default();
        cfg.limits.tau_max = Some(Toggle::Flag(true));
        cfg.limits.delta_max = Some(Toggle::Value(0.3));
        let task = cfg.resolve_task().unwrap();
        assert_eq!(task.limits.tau_max, Some(task.motor.tau_max));
        assert_eq!(task.limits.delta_max, Some(0.3));
        assert_eq!(task.limits.dq_max, None);
    }

    #[test]
    fn cubic_default_motor_is_lossless() {
        let task = RunConfig::default().resolve_task().unwrap();
        assert_eq!(task.motor.eta, 1.0);
        let mut cfg = RunConfig::default();
        cfg.motor.preset = Some("ilm85x26".into());
        assert_eq!(cfg.resolve_task().unwrap().motor.eta, 0.8);
    }
}
