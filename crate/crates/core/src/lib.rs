//! Kinematics and teleoperation control for a tendon-driven continuum
//! instrument carried by a 7-DoF arm through a remote center of motion.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: poses, twists and rotation errors.
//! - [`continuum`]: constant-curvature segment kinematics.
//! - [`manipulator`]: DH forward kinematics and geometric Jacobians.
//! - [`rcm`]: the augmented state and its constraint/tip Jacobians.
//! - [`linalg`]: an accurate thin SVD.
//! - [`solver`]: pseudoinverses and prioritized redundancy resolution.
//! - [`controller`]: resolved-rate control and state integration.
//! - [`teleop`]: clutched stylus-to-tip pose mapping.
//! - [`actuation`]: motor pulley positions and rates.
//! - [`metrics`]: SVD dexterity metrics and case comparison reports.
//! - [`harness`]: trajectories, simulation runs, logs, config and the
//!   live teleoperation service.

// Validation is written as `!(x > 0.0)` on purpose: the negation also
// rejects NaN, which the rewritten comparison would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuation;
pub mod continuum;
pub mod controller;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod manipulator;
pub mod metrics;
pub mod rcm;
pub mod solver;
pub mod teleop;

mod error;

pub use error::{Error, Result};
