//! Long-horizon state layout and the skill <-> long-horizon maps.
//!
//! Layout: object pose at 0..6 (x, y, z, roll, pitch, yaw), end-effector pose
//! at 6..12, optional planar tool pose at 12..15 (x, y, yaw). Euler angles are
//! intrinsic Z-Y-X.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{SkillKind, SkillMdp};
use crate::{wrap_angle, Error, Result};

pub const OBJECT: usize = 0;
pub const EFFECTOR: usize = 6;
pub const TOOL: usize = 12;
pub(crate) const MAX_DIM: usize = 15;

const NAMES: [&str; MAX_DIM] = [
    "object.x",
    "object.y",
    "object.z",
    "object.roll",
    "object.pitch",
    "object.yaw",
    "effector.x",
    "effector.y",
    "effector.z",
    "effector.roll",
    "effector.pitch",
    "effector.yaw",
    "tool.x",
    "tool.y",
    "tool.yaw",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LongHorizonState(Vec<f64>);

impl LongHorizonState {
    pub fn new(values: Vec<f64>, position_bound: f64) -> Result<Self> {
        Self::check(&values, position_bound)?;
        Ok(Self(values))
    }

    pub fn check(values: &[f64], position_bound: f64) -> Result<()> {
        if values.len() != TOOL && values.len() != MAX_DIM {
            return Err(Error::Config(format!(
                "long-horizon state has {} entries, expected {TOOL} or {MAX_DIM}",
                values.len()
            )));
        }
        for (d, &v) in values.iter().enumerate() {
            let bound = if Self::is_angle(d) { PI } else { position_bound };
            if !(v.abs() <= bound) {
                return Err(Error::Domain { dim: d, value: v, lower: -bound, upper: bound });
            }
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn has_tool(&self) -> bool {
        self.0.len() == MAX_DIM
    }

    pub fn is_angle(dim: usize) -> bool {
        matches!(dim, 3 | 4 | 5 | 9 | 10 | 11 | 14)
    }

    pub fn dim_name(dim: usize) -> &'static str {
        NAMES.get(dim).copied().unwrap_or("?")
    }

    /// Distance between two states, angle components wrapped.
    pub fn distance(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(d, (x, y))| {
                let e = if Self::is_angle(d) { wrap_angle(x - y) } else { x - y };
                e * e
            })
            .sum::<f64>()
            .sqrt()
    }
}

fn diff(d: usize, a: f64, b: f64) -> f64 {
    if LongHorizonState::is_angle(d) {
        wrap_angle(a - b)
    } else {
        a - b
    }
}

/// Skill state for moving the long-horizon `start` to `goal`.
///
/// The result may leave the skill's state box; see [`SkillMdp::box_excess`].
/// Push measures the offset in the goal's frame and starts on face 0 at its
/// centre.
pub fn gamma_map(mdp: &SkillMdp, dims: &[usize], start: &[f64], goal: &[f64]) -> Vec<f64> {
    match mdp.kind {
        SkillKind::Pivot => vec![start[dims[0]], goal[dims[0]]],
        SkillKind::Push => {
            let (dx, dy) = (start[dims[0]] - goal[dims[0]], start[dims[1]] - goal[dims[1]]);
            let (sin, cos) = goal[dims[2]].sin_cos();
            vec![
                cos * dx + sin * dy,
                -sin * dx + cos * dy,
                wrap_angle(start[dims[2]] - goal[dims[2]]),
                0.0,
                0.0,
            ]
        }
        _ => dims
            .iter()
            .map(|&d| diff(d, start[d], goal[d]))
            .collect(),
    }
}

/// Write a skill state back into `goal`'s skill dims; all other dims are copied.
pub fn phi_map(mdp: &SkillMdp, dims: &[usize], skill_state: &[f64], goal: &[f64]) -> Vec<f64> {
    let mut out = goal.to_vec();
    let settle = |d: usize, v: f64| {
        if LongHorizonState::is_angle(d) {
            wrap_angle(v)
        } else {
            v
        }
    };
    match mdp.kind {
        SkillKind::Pivot => out[dims[0]] = skill_state[0],
        SkillKind::Push => {
            let (sin, cos) = goal[dims[2]].sin_cos();
            let (lx, ly) = (skill_state[0], skill_state[1]);
            out[dims[0]] = goal[dims[0]] + cos * lx - sin * ly;
            out[dims[1]] = goal[dims[1]] + sin * lx + cos * ly;
            out[dims[2]] = wrap_angle(goal[dims[2]] + skill_state[2]);
        }
        _ => {
            for (k, &d) in dims.iter().enumerate() {
                out[d] = settle(d, goal[d] + skill_state[k]);
            }
        }
    }
    out
}
