//! Optimal jamming-attack scheduling against remote Kalman-filter state
//! estimation over lossy channels.
//!
//! M independent unstable plants stream local state estimates to a fusion
//! center; an attacker jams exactly N of the M channels at each step to
//! maximize the long-run average estimation error. This crate provides:
//!
//! - [`model`] — subsystem models, steady-state error covariances via the
//!   discrete algebraic Riccati recursion, and the covariance propagation
//!   operator `h`.
//! - [`mdp`] — the truncated product-state average-reward MDP, solved by
//!   relative value iteration, plus verifiers for the structural properties
//!   the optimal policy is known to have (threshold form, monotone and
//!   submodular differential value).
//! - [`whittle`] — the single-channel subsidy relaxation: closed-form
//!   Whittle-style indices, an independent subsidy-search oracle, and an
//!   indexability checker.
//! - [`sim`] — seeded Monte Carlo evaluation of attack policies
//!   (tabular-optimal, myopic, index-based, uniform-random).
//! - [`cli`] — config-driven front end with `validate`, `solve`, `index`,
//!   `simulate`, and `reproduce` subcommands.

pub mod bench;
pub mod config;
pub mod mdp;
pub mod model;
pub mod sim;
pub mod whittle;
pub mod cli;
