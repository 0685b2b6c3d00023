//! Bundled tasks: the cubic-spring oscillation and two synthetic gait-like
//! ankle trajectories built from band-limited periodic bumps.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::discretization::{LoadModel, MotorParams};
use crate::error::Result;
use crate::problem::Limits;
use crate::trajectory::{generate_cubic_oscillation, CubicSpringSystem, Trajectory};

/// A trajectory with the load model, motor and limits it is meant to run with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub name: String,
    pub trajectory: Trajectory,
    pub load: LoadModel,
    pub motor: MotorParams,
    pub limits: Limits,
}

/// Truncated Fourier series of a periodic Gaussian bump of width `s` centred
/// at `c` (both as fractions of the period), evaluated at phase `t`.
pub fn periodic_bump(t: f64, c: f64, s: f64, harmonics: usize) -> f64 {
    let a = |k: usize| s * (2.0 * PI).sqrt() * (-2.0 * PI * PI * (k * k) as f64 * s * s).exp();
    let mut y = a(0);
    for k in 1..=harmonics {
        y += 2.0 * a(k) * (2.0 * PI * k as f64 * (t - c)).cos();
    }
    y
}

/// Shape of a synthetic ankle-like gait cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaitShape {
    pub period: f64,
    /// Scale of the push-off torque bump (N·m).
    pub torque_peak: f64,
    /// Scale of the joint-angle excursion (rad).
    pub angle_amplitude: f64,
    pub harmonics: usize,
}

impl GaitShape {
    /// Running-like cycle whose rigid actuation exceeds the motor limits.
    pub fn running() -> Self {
        GaitShape { period: 0.66, torque_peak: 156.0, angle_amplitude: 0.425, harmonics: 8 }
    }

    /// Slower walking-like cycle.
    pub fn walking() -> Self {
        GaitShape { period: 1.14, torque_peak: 110.0, angle_amplitude: 0.3, harmonics: 8 }
    }

    /// Samples `(q_l, τ_ext)` on `n` uniform points of one period.
    pub fn sample(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let k = self.harmonics;
        let mut q = Vec::with_capacity(n);
        let mut tau = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 / n as f64;
            // stance loading then push-off, small negative torque in swing
            tau.push(self.torque_peak * periodic_bump(t, 0.25, 0.09, k) - 8.0 * periodic_bump(t, 0.7, 0.15, k));
            q.push(self.angle_amplitude * (0.6 * periodic_bump(t, 0.2, 0.08, k) - periodic_bump(t, 0.42, 0.06, k)));
        }
        (q, tau)
    }

    pub fn trajectory(&self, n: usize, label: &str) -> Result<Trajectory> {
        let (q, tau) = self.sample(n);
        Trajectory::from_positions(q, tau, self.period / n as f64, label)
    }
}

/// Motor of the cubic case: the preset with a lossless transmission.
pub fn cubic_motor() -> MotorParams {
    MotorParams { eta: 1.0, ..MotorParams::ilm85x26() }
}

/// Free oscillation of the cubic spring with `τ_ela = -I_l q̈_l`.
pub fn cubic_task(n: usize) -> Result<Task> {
    let sys = CubicSpringSystem::default();
    let osc = generate_cubic_oscillation(&sys, n)?;
    Ok(Task {
        name: "cubic".into(),
        trajectory: osc.trajectory,
        load: LoadModel::inertial(sys.i_l, 0.0),
        motor: cubic_motor(),
        limits: Limits::none(),
    })
}

/// Walking-like cycle in direct-torque mode, no limits.
pub fn walking_task(n: usize) -> Result<Task> {
    Ok(Task {
        name: "walking".into(),
        trajectory: GaitShape::walking().trajectory(n, "walking")?,
        load: LoadModel::direct_torque(),
        motor: MotorParams::ilm85x26(),
        limits: Limits::none(),
    })
}

/// Running-like cycle with motor limits and a 0.4 rad elongation bound.
pub fn running_task(n: usize) -> Result<Task> {
    let motor = MotorParams::ilm85x26();
    Ok(Task {
        name: "running".into(),
        trajectory: GaitShape::running().trajectory(n, "running")?,
        load: LoadModel::direct_torque(),
        motor,
        limits: Limits::from_motor(&motor, Some(0.4)),
    })
}

pub fn bundled_tasks(n: usize) -> Result<Vec<Task>> {
    Ok(vec![cubic_task(n)?, walking_task(n)?, running_task(n)?])
}

pub fn task_by_name(name: &str, n: usize) -> Option<Result<Task>> {
    match name {
        "cubic" => Some(cubic_task(n)),
        "walking" => Some(walking_task(n)),
        "running" => Some(running_task(n)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_integrates_to_width_times_sqrt_two_pi() {
        let n = 2000;
        let s: f64 = (0..n).map(|i| periodic_bump(i as f64 / n as f64, 0.3, 0.05, 40)).sum::<f64>() / n as f64;
        assert!((s - 0.05 * (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bump_peaks_at_centre() {
        let at = periodic_bump(0.3, 0.3, 0.05, 40);
        assert!((at - 1.0).abs() < 1e-9, "{at}");
    }
}
