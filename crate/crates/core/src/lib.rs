//! Direct search over low-dimensional controller parameters as a
//! reinforcement-learning method, with the finite-MDP theory that backs it.
//!
//! The crate has three layers:
//!
//! - [`mdp`]: finite MDPs, policy families, neighborhood-aggregated Bellman
//!   operators, partition-level aggregate MDPs and a randomized verification
//!   suite.
//! - [`envs`] / [`controllers`]: classic-control benchmark environments and
//!   the parameterized controller families searched over them.
//! - [`search`] / [`qlearn`] / [`bench`]: the differential-evolution search
//!   driver, the discretized Q-learning baseline and the experiment runner
//!   that compares them.

pub mod bench;
pub mod controllers;
pub mod envs;
pub mod error;
pub mod mdp;
pub mod qlearn;
pub mod search;
pub mod seeding;

pub use error::{Error, Result};
