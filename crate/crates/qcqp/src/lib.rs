//! Sparse interior-point solver for convex quadratic programs with affine
//! constraints and rank-one convex quadratic inequalities.
//!
//! The linear algebra is an envelope LDLᵀ under a reverse Cuthill–McKee
//! ordering, which suits banded problems with a handful of dense rows.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ipm;
pub mod kkt;
pub mod ldl;
pub mod ordering;
pub mod problem;
pub mod sparse;

pub use error::QcqpError;
pub use ipm::{solve, IterationRecord, Solution, SolverConfig, Status, Witness};
pub use kkt::{kkt_residuals, KktResiduals, Multipliers};
pub use problem::{Qcqp, RankOneConstraint};
pub use sparse::{CsrMatrix, SparseVec};
