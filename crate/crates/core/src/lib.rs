//! Design of nonlinear series-elastic springs from periodic load trajectories.
//!
//! A trajectory fixes the torque the spring must transmit. The motor
//! trajectory is then chosen by convex optimization to trade motor energy
//! against peak power, and the spring characteristic is read off the
//! resulting elongation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod discretization;
pub mod error;
pub mod fixtures;
pub mod oracle;
pub mod problem;
pub mod solver;
pub mod spring;
pub mod trajectory;

pub use error::{Error, Result};
