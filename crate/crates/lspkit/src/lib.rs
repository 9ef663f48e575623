//! Planning over sequences of learned manipulation skills.
//!
//! The pieces, bottom up:
//!
//! - [`tt`]: tensor trains on uniform grids, TT-cross, rounding, argmax, storage.
//! - [`skills`]: analytic skill MDPs (push, pivot, pull, pick, place) and the
//!   maps between a skill's local state and the long-horizon state.
//! - [`value`]: TT value iteration, greedy policies, rollouts.
//! - [`symbolic`]: ground operators and MCTS over skeletons.
//! - [`cem`]: cross-entropy search over mixed continuous/categorical variables.
//! - [`lsp`]: the planner that ties the above together.
//! - [`bench`]: baselines and the benchmark harness.

pub mod bench;
pub mod cem;
pub mod error;
pub mod lsp;
pub mod par;
pub mod skills;
pub mod symbolic;
pub mod tt;
pub mod value;

pub use error::{Error, Result};

/// Wrap an angle into `[-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    if (-PI..=PI).contains(&a) {
        return a;
    }
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI && a > 0.0 {
        PI
    } else {
        w
    }
}
