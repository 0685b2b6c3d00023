//! Solving assembled instances and certifying the result.

use seaspring_qcqp as qcqp;
pub use seaspring_qcqp::{IterationRecord, KktResiduals, Multipliers, SolverConfig, Status, Witness};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemInstance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub q_m: Vec<f64>,
    /// Peak convex power slack (W); the tight value when `s` was pruned.
    pub s: f64,
    /// Peak acceleration slack (rad/s²); the tight value when `a` was pruned.
    pub a: f64,
    pub objective: f64,
    pub status: Status,
    pub kkt: KktResiduals,
    pub iterations: usize,
    pub multipliers: Multipliers,
    pub witness: Option<Witness>,
    #[serde(skip)]
    pub log: Vec<IterationRecord>,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// Decision vector `(q_m, s, a)` restricted to the variables present in `inst`.
    pub fn decision_vector(&self, inst: &ProblemInstance) -> Vec<f64> {
        let mut x = self.q_m.clone();
        if inst.has_s {
            x.push(self.s);
        }
        if inst.has_a {
            x.push(self.a);
        }
        x
    }

    pub fn log_text(&self) -> String {
        let mut s = String::from(IterationRecord::HEADER);
        s.push('\n');
        for r in &self.log {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }
}

/// Solves `inst` starting from its stiff-spring seed.
pub fn solve(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<Solution> {
    let prob = inst.to_qcqp();
    let x0 = inst.initial_point(&inst.seed);
    let sol = qcqp::solve(&prob, Some(&x0), cfg)?;
    let q_m = sol.x[..inst.n].to_vec();
    let (s_tight, a_tight) = inst.tight_slacks(&q_m);
    let s = inst.s_index().map_or(s_tight, |i| sol.x[i]);
    let a = inst.a_index().map_or(a_tight, |i| sol.x[i]);
    Ok(Solution {
        q_m,
        s,
        a,
        objective: sol.objective,
        status: sol.status,
        kkt: sol.kkt,
        iterations: sol.iterations,
        multipliers: sol.multipliers,
        witness: sol.witness,
        log: sol.log,
    })
}

/// Scaled KKT residuals of a candidate `(q_m, s, a)` with multipliers for the
/// lowered program.
pub fn kkt_residuals(inst: &ProblemInstance, candidate: &[f64], multipliers: &Multipliers) -> Result<KktResiduals> {
    let prob = inst.to_qcqp();
    if candidate.len() != prob.n {
        return Err(Error::Dimension(format!("candidate has {} entries, expected {}", candidate.len(), prob.n)));
    }
    if multipliers.z.len() != prob.m_ineq() || multipliers.y.len() != prob.b_eq.len() {
        return Err(Error::Dimension("multiplier count".into()));
    }
    Ok(qcqp::kkt_residuals(&prob, candidate, multipliers))
}
