//! Deterministic simulator and adversarial analysis toolkit for parallel
//! search on a line by robots with Byzantine faults.
//!
//! `n` robots start at the origin of an infinite line; at most `f` of them
//! are faulty. A target sits at unknown distance `d`. Robots move at unit
//! speed, broadcast instantaneously, and resolve conflicting target claims
//! by majority voting. The crate provides:
//!
//! - exact rational kinematics ([`rational`], [`trajectory`]),
//! - the claim ledger and vote rules ([`voting`]),
//! - an event-driven simulation engine ([`engine`]),
//! - the search strategies ([`strategies`]),
//! - exhaustive worst-case adversaries ([`adversary`]),
//! - feasibility and ratio analysis ([`analysis`]).

pub mod adversary;
pub mod analysis;
pub mod engine;
pub mod rational;
pub mod strategies;
pub mod trajectory;
pub mod voting;

pub use rational::Rational;
pub use trajectory::{Pos, RobotId, Target, Time, Trajectory};
