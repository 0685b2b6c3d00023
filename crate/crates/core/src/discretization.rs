//! Periodic difference operators, motor/load parameters and the discrete
//! actuator dynamics.

use seaspring_qcqp::CsrMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Periodic first- and second-derivative operators on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffOperators {
    pub n: usize,
    pub dt: f64,
    /// Central difference, rows `[.., -1, 0, 1, ..] / (2 dt)` with wrap.
    pub d: CsrMatrix,
    /// Rows `[.., 1, -2, 1, ..] / dt²` with wrap.
    pub d2: CsrMatrix,
}

pub fn build_operators(n: usize, dt: f64) -> Result<DiffOperators> {
    if n < 4 {
        return Err(Error::TooFewSamples { min: 4, got: n });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let h1 = 1.0 / (2.0 * dt);
    let h2 = 1.0 / (dt * dt);
    let mut t1 = Vec::with_capacity(2 * n);
    let mut t2 = Vec::with_capacity(3 * n);
    for i in 0..n {
        let next = (i + 1) % n;
        let prev = (i + n - 1) % n;
        t1.push((i, next, h1));
        t1.push((i, prev, -h1));
        t2.push((i, prev, h2));
        t2.push((i, i, -2.0 * h2));
        t2.push((i, next, h2));
    }
    Ok(DiffOperators {
        n,
        dt,
        d: CsrMatrix::from_triplets(n, n, &t1),
        d2: CsrMatrix::from_triplets(n, n, &t2),
    })
}

impl DiffOperators {
    pub fn apply_d(&self, x: &[f64]) -> Vec<f64> {
        self.d.mul_vec(x)
    }

    pub fn apply_d2(&self, x: &[f64]) -> Vec<f64> {
        self.d2.mul_vec(x)
    }

    /// Rows of `I_m D2 + b_m D` (motor-side dynamics operator).
    pub fn motor_operator(&self, i_m: f64, b_m: f64) -> CsrMatrix {
        self.d2.add(i_m, &self.d, b_m)
    }
}

/// Electromechanical constants of motor and transmission.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorParams {
    /// Torque constant (N·m/A).
    pub k_t: f64,
    /// Terminal resistance (Ω).
    pub resistance: f64,
    /// Motor constant k_t/√R (N·m/√W).
    pub k_m: f64,
    /// Rotor plus assembly inertia (kg·m²).
    pub i_m: f64,
    /// Viscous friction (N·m·s/rad).
    pub b_m: f64,
    /// Transmission ratio.
    pub r: f64,
    pub eta: f64,
    /// Motor torque limit (N·m).
    pub tau_max: f64,
    /// Motor speed limit (rad/s).
    pub dq_max: f64,
}

impl MotorParams {
    /// Builds parameters with `k_m` derived from `k_t` and `R`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(k_t: f64, resistance: f64, i_m: f64, b_m: f64, r: f64, eta: f64, tau_max: f64, dq_max: f64) -> Result<Self> {
        let p = MotorParams { k_t, resistance, k_m: k_t / resistance.sqrt(), i_m, b_m, r, eta, tau_max, dq_max };
        p.validate()?;
        Ok(p)
    }

    /// ILM85x26 frameless motor with a 22:1 transmission.
    ///
    /// Inertia is rotor (1.15 kg·cm²) plus assembly (0.131 kg·cm²).
    pub fn ilm85x26() -> Self {
        MotorParams::new(0.24, 0.323, 1.15e-4 + 0.131e-4, 6e-5, 22.0, 0.8, 8.3, 1500.0 * std::f64::consts::PI / 30.0)
            .expect("preset is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("k_t", self.k_t),
            ("R", self.resistance),
            ("k_m", self.k_m),
            ("I_m", self.i_m),
            ("b_m", self.b_m),
            ("r", self.r),
            ("eta", self.eta),
            ("tau_max", self.tau_max),
            ("dq_max", self.dq_max),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.eta > 1.0 {
            return Err(Error::InvalidParameter(format!("eta must be at most 1, got {}", self.eta)));
        }
        let km = self.k_t / self.resistance.sqrt();
        if (km - self.k_m).abs() > 1e-9 * km {
            return Err(Error::InvalidParameter(format!("k_m = {} inconsistent with k_t/sqrt(R) = {km}", self.k_m)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadMode {
    /// `τ_ela = -I_l q̈_l - b_l q̇_l + τ_ext`.
    InertialViscous,
    /// `τ_ela = τ_ext`.
    DirectTorque,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadModel {
    pub mode: LoadMode,
    pub i_l: f64,
    pub b_l: f64,
}

impl LoadModel {
    pub fn inertial(i_l: f64, b_l: f64) -> Self {
        LoadModel { mode: LoadMode::InertialViscous, i_l, b_l }
    }

    pub fn direct_torque() -> Self {
        LoadModel { mode: LoadMode::DirectTorque, i_l: 0.0, b_l: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.i_l >= 0.0 && self.b_l >= 0.0 && self.i_l.is_finite() && self.b_l.is_finite()) {
            return Err(Error::InvalidParameter("load inertia and friction must be nonnegative".into()));
        }
        Ok(())
    }
}

fn check_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("{what}: {a} vs {b}")));
    }
    Ok(())
}

/// Elastic torque transmitted by the spring to follow the trajectory.
pub fn elastic_torque(traj: &Trajectory, load: &LoadModel) -> Vec<f64> {
    match load.mode {
        LoadMode::DirectTorque => traj.tau_ext.clone(),
        LoadMode::InertialViscous => (0..traj.n)
            .map(|i| -load.i_l * traj.ddq_l[i] - load.b_l * traj.dq_l[i] + traj.tau_ext[i])
            .collect(),
    }
}

/// `τ_m = (I_m D2 + b_m D) q_m - τ_ela / (η r)`.
pub fn motor_torque(q_m: &[f64], tau_ela: &[f64], p: &MotorParams, ops: &DiffOperators) -> Result<Vec<f64>> {
    check_len("q_m vs grid", q_m.len(), ops.n)?;
    check_len("tau_ela vs grid", tau_ela.len(), ops.n)?;
    let acc = ops.apply_d2(q_m);
    let vel = ops.apply_d(q_m);
    let er = p.eta * p.r;
    Ok((0..ops.n).map(|i| p.i_m * acc[i] + p.b_m * vel[i] - tau_ela[i] / er).collect())
}

/// `δ = q_l - q_m / r`.
pub fn elongation(q_m: &[f64], q_l: &[f64], r: f64) -> Result<Vec<f64>> {
    check_len("q_m vs q_l", q_m.len(), q_l.len())?;
    Ok(q_l.iter().zip(q_m).map(|(l, m)| l - m / r).collect())
}

/// Mechanical motor power `τ_m,i (D q_m)_i`.
pub fn power_series(q_m: &[f64], tau_ela: &[f64], p: &MotorParams, ops: &DiffOperators) -> Result<Vec<f64>> {
    let tau_m = motor_torque(q_m, tau_ela, p, ops)?;
    let vel = ops.apply_d(q_m);
    Ok(tau_m.iter().zip(&vel).map(|(t, v)| t * v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_row_of_d_for_n4() {
        let ops = build_operators(4, 1.0).unwrap();
        assert_eq!(ops.d.to_dense()[0], vec![0.0, 0.5, 0.0, -0.5]);
        assert_eq!(ops.d2.to_dense()[0], vec![-2.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn skew_symmetry_is_exact() {
        let ops = build_operators(17, 0.013).unwrap();
        assert_eq!(ops.d.add(1.0, &ops.d.transpose(), 1.0).max_abs(), 0.0);
    }

    #[test]
    fn rejects_small_grids() {
        assert!(matches!(build_operators(3, 1.0), Err(Error::TooFewSamples { .. })));
        assert!(build_operators(8, 0.0).is_err());
    }

    #[test]
    fn preset_motor_constant() {
        let p = MotorParams::ilm85x26();
        assert!((p.k_m - 0.24 / 0.323f64.sqrt()).abs() < 1e-15);
        assert!((p.dq_max - 157.0796).abs() < 1e-4);
    }

    #[test]
    fn inconsistent_km_rejected() {
        let mut p = MotorParams::ilm85x26();
        p.k_m *= 1.001;
        assert!(p.validate().is_err());
    }
}
