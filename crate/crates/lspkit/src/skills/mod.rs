//! Analytic skill MDPs and the maps between skill and long-horizon states.
//!
//! Every skill state is expressed relative to the skill's goal, so the target
//! is the origin (pivot carries its goal angle as a second coordinate instead).
//! Discrete state and action dimensions are stored as small integer values
//! after the continuous ones.

mod maps;
mod params;
mod push;

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use maps::{gamma_map, phi_map, LongHorizonState, EFFECTOR, OBJECT, TOOL};
pub use params::{DomainParams, SkillParams};
pub use push::{face_frame, ContactParams, PushMotion};

use crate::tt::Grid;
use crate::{wrap_angle, Error, Result};

/// Position error below which a skill counts as finished, meters.
pub const POSITION_TOLERANCE: f64 = 0.03;
/// Orientation error below which a skill counts as finished (15 degrees).
pub const ORIENTATION_TOLERANCE: f64 = 15.0 * PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkillKind {
    Push,
    Pivot,
    Pull,
    Pick,
    Place,
}

impl SkillKind {
    pub const ALL: [SkillKind; 5] = [Self::Push, Self::Pivot, Self::Pull, Self::Pick, Self::Place];

    pub fn name(self) -> &'static str {
        match self {
            Self::Push => "push",
            Self::Pivot => "pivot",
            Self::Pull => "pull",
            Self::Pick => "pick",
            Self::Place => "place",
        }
    }

    /// Skill behind an operator name: the token before the first underscore.
    pub fn of_operator(op: &str) -> Result<Self> {
        op.split('_').next().unwrap_or(op).parse()
    }
}

impl fmt::Display for SkillKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SkillKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown skill '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Full product of per-dimension levels.
    Product,
    /// The zero action plus one nonzero dimension at a time.
    Axis,
}

/// One block of candidate actions for the greedy maximization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePart {
    pub layout: Layout,
    /// Uniform levels per continuous action dimension.
    pub counts: Vec<usize>,
    /// Fraction of the action bounds covered by the levels.
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl CandidatePart {
    pub fn product(counts: Vec<usize>) -> Self {
        Self { layout: Layout::Product, counts, scale: 1.0 }
    }

    pub fn axis(counts: Vec<usize>, scale: f64) -> Self {
        Self { layout: Layout::Axis, counts, scale }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillMdp {
    pub kind: SkillKind,
    pub state_lower: Vec<f64>,
    pub state_upper: Vec<f64>,
    pub state_categories: Vec<usize>,
    pub action_lower: Vec<f64>,
    pub action_upper: Vec<f64>,
    pub action_categories: Vec<usize>,
    pub dt: f64,
    pub gamma: f64,
    /// Weight of the orientation cost.
    pub rho: f64,
    pub l_p: f64,
    pub l_o: f64,
    pub contact: ContactParams,
}

impl SkillMdp {
    pub fn new(kind: SkillKind, params: &DomainParams) -> Result<Self> {
        let sp = params.skill(kind)?;
        let b = params.position_bound;
        let a = &sp.action_max;
        let need = |n: usize| -> Result<()> {
            if a.len() != n {
                return Err(Error::Config(format!("{kind}: action_max needs {n} entries, got {}", a.len())));
            }
            Ok(())
        };
        let (sl, su, sc, al, au, ac): (Vec<f64>, Vec<f64>, Vec<usize>, Vec<f64>, Vec<f64>, Vec<usize>) = match kind {
            SkillKind::Push => {
                need(1)?;
                let w = params.contact.half_width;
                (
                    vec![-b, -b, -PI, -w],
                    vec![b, b, PI, w],
                    vec![4],
                    vec![0.0, -a[0]],
                    vec![a[0], a[0]],
                    vec![4],
                )
            }
            SkillKind::Pivot => {
                need(1)?;
                (vec![-PI, -PI], vec![PI, PI], vec![], vec![-a[0]], vec![a[0]], vec![])
            }
            SkillKind::Pull => {
                need(2)?;
                (
                    vec![-b, -b, -PI],
                    vec![b, b, PI],
                    vec![],
                    vec![-a[0], -a[0], -a[1]],
                    vec![a[0], a[0], a[1]],
                    vec![],
                )
            }
            SkillKind::Pick | SkillKind::Place => {
                need(2)?;
                (
                    vec![-b, -b, -b, -PI, -PI, -PI],
                    vec![b, b, b, PI, PI, PI],
                    vec![],
                    vec![-a[0], -a[0], -a[0], -a[1], -a[1], -a[1]],
                    vec![a[0], a[0], a[0], a[1], a[1], a[1]],
                    vec![],
                )
            }
        };
        let mdp = Self {
            kind,
            state_lower: sl,
            state_upper: su,
            state_categories: sc,
            action_lower: al,
            action_upper: au,
            action_categories: ac,
            dt: params.dt,
            gamma: params.gamma,
            rho: sp.rho,
            l_p: params.l_p,
            l_o: params.l_o,
            contact: params.contact.clone(),
        };
        mdp.check()?;
        Ok(mdp)
    }

    /// The skill with default parameters.
    pub fn standard(kind: SkillKind) -> Self {
        Self::new(kind, &DomainParams::default()).expect("default parameters are valid")
    }

    fn check(&self) -> Result<()> {
        let finite_box = |lo: &[f64], hi: &[f64]| lo.iter().zip(hi).all(|(l, h)| l.is_finite() && h.is_finite() && l <= h);
        if !finite_box(&self.state_lower, &self.state_upper) || !finite_box(&self.action_lower, &self.action_upper) {
            return Err(Error::Config(format!("{}: bounds must be finite and ordered", self.kind)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("{}: discount must lie in (0, 1), got {}", self.kind, self.gamma)));
        }
        if !(self.dt > 0.0 && self.l_p > 0.0 && self.l_o > 0.0 && self.rho >= 0.0) {
            return Err(Error::Config(format!("{}: dt, l_p, l_o must be positive and rho non-negative", self.kind)));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.state_lower.len() + self.state_categories.len()
    }

    pub fn action_dim(&self) -> usize {
        self.action_lower.len() + self.action_categories.len()
    }

    /// Grid over the state box; discrete dims must use one node per category.
    pub fn grid(&self, counts: &[usize]) -> Result<Grid> {
        if counts.len() != self.state_dim() {
            return Err(Error::Config(format!(
                "{}: grid has {} dims, state has {}",
                self.kind,
                counts.len(),
                self.state_dim()
            )));
        }
        let nc = self.state_lower.len();
        let mut lower = self.state_lower.clone();
        let mut upper = self.state_upper.clone();
        for (j, &k) in self.state_categories.iter().enumerate() {
            if counts[nc + j] != k {
                return Err(Error::Config(format!(
                    "{}: discrete dim {} needs {k} grid nodes, got {}",
                    self.kind,
                    nc + j,
                    counts[nc + j]
                )));
            }
            lower.push(0.0);
            upper.push((k - 1) as f64);
        }
        Grid::new(lower, upper, counts.to_vec())
    }

    pub fn in_bounds(&self, x: &[f64]) -> bool {
        let nc = self.state_lower.len();
        x.len() == self.state_dim()
            && (0..nc).all(|k| x[k] >= self.state_lower[k] && x[k] <= self.state_upper[k])
            && self
                .state_categories
                .iter()
                .enumerate()
                .all(|(j, &c)| x[nc + j] >= 0.0 && x[nc + j] < c as f64 && x[nc + j].fract() == 0.0)
    }

    /// Euclidean distance of the continuous part of `x` from the state box.
    pub fn box_excess(&self, x: &[f64]) -> f64 {
        (0..self.state_lower.len())
            .map(|k| {
                let e = (self.state_lower[k] - x[k]).max(x[k] - self.state_upper[k]).max(0.0);
                e * e
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Clamp the continuous part of `x` into the state box.
    pub fn clamp_state(&self, x: &mut [f64]) {
        for k in 0..self.state_lower.len() {
            x[k] = x[k].clamp(self.state_lower[k], self.state_upper[k]);
        }
    }

    /// Angular state dims, which wrap instead of clamping.
    fn wraps(&self, k: usize) -> bool {
        match self.kind {
            SkillKind::Push | SkillKind::Pull => k == 2,
            SkillKind::Pick | SkillKind::Place => (3..6).contains(&k),
            SkillKind::Pivot => false,
        }
    }

    fn settle(&self, k: usize, v: f64) -> f64 {
        if self.wraps(k) {
            wrap_angle(v)
        } else {
            v.clamp(self.state_lower[k], self.state_upper[k])
        }
    }

    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.step_into(x, u, &mut out);
        out
    }

    /// Deterministic transition; out-of-box results are clamped.
    pub fn step_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        if self.kind == SkillKind::Push {
            return self.push_step(x, u, out);
        }
        for k in 0..x.len() {
            out[k] = self.settle(k, x[k] + u.get(k).copied().unwrap_or(0.0) * self.dt);
        }
    }

    fn push_step(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let face = x[4] as usize;
        let next = u[2] as usize;
        let s = if next != face { 0.0 } else { x[3] };
        let m = self.contact.motion(next, s, u[0], u[1]);
        let (sin, cos) = x[2].sin_cos();
        let [vx, vy, w] = m.twist;
        out[0] = self.settle(0, x[0] + (cos * vx - sin * vy) * self.dt);
        out[1] = self.settle(1, x[1] + (sin * vx + cos * vy) * self.dt);
        out[2] = self.settle(2, x[2] + w * self.dt);
        out[3] = self.settle(3, s + m.slip * self.dt);
        out[4] = next as f64;
    }

    /// Position and orientation distance to the target.
    pub fn errors(&self, x: &[f64]) -> (f64, f64) {
        match self.kind {
            SkillKind::Push | SkillKind::Pull => (x[0].hypot(x[1]), wrap_angle(x[2]).abs()),
            SkillKind::Pivot => (0.0, (x[0] - x[1]).abs()),
            SkillKind::Pick | SkillKind::Place => {
                let p = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                let o = x[3..6].iter().map(|a| wrap_angle(*a).powi(2)).sum::<f64>().sqrt();
                (p, o)
            }
        }
    }

    /// The part of the reward that depends on the state alone.
    pub fn state_cost(&self, x: &[f64]) -> f64 {
        let (pe, oe) = self.errors(x);
        pe / self.l_p + self.rho * oe / self.l_o
    }

    pub fn action_cost(&self, x: &[f64], u: &[f64]) -> f64 {
        let nu = self.action_lower.len();
        let c_a = u[..nu].iter().map(|v| v * v).sum::<f64>().sqrt();
        let c_f = if self.kind == SkillKind::Push && u[2] != x[4] { 1.0 } else { 0.0 };
        0.01 * c_a + 0.1 * c_f
    }

    pub fn reward(&self, x: &[f64], u: &[f64]) -> f64 {
        -(self.state_cost(x) + self.action_cost(x, u))
    }

    pub fn is_success(&self, x: &[f64]) -> bool {
        let (pe, oe) = self.errors(x);
        pe < POSITION_TOLERANCE && oe < ORIENTATION_TOLERANCE
    }

    /// Candidate actions in enumeration order: discrete combinations outermost,
    /// then each part's continuous levels. Exact duplicates keep their first slot.
    pub fn candidates(&self, parts: &[CandidatePart]) -> Result<Vec<Vec<f64>>> {
        let nu = self.action_lower.len();
        let mut cont: Vec<Vec<f64>> = Vec::new();
        for part in parts {
            if part.counts.len() != nu {
                return Err(Error::Config(format!(
                    "{}: candidate part has {} counts for {nu} action dims",
                    self.kind,
                    part.counts.len()
                )));
            }
            if part.counts.iter().any(|&c| c < 3) {
                return Err(Error::Config(format!("{}: candidate counts must be at least 3", self.kind)));
            }
            if !(part.scale > 0.0 && part.scale <= 1.0) {
                return Err(Error::Config(format!("{}: candidate scale must lie in (0, 1]", self.kind)));
            }
            let levels: Vec<Vec<f64>> = (0..nu)
                .map(|k| {
                    let (lo, hi, m) = (self.action_lower[k], self.action_upper[k], part.counts[k]);
                    (0..m)
                        .map(|i| part.scale * (lo + (hi - lo) * (i as f64 / (m - 1) as f64)))
                        .collect()
                })
                .collect();
            match part.layout {
                Layout::Product => {
                    let total: usize = levels.iter().map(Vec::len).product();
                    for mut r in 0..total {
                        let mut u = vec![0.0; nu];
                        for k in (0..nu).rev() {
                            let m = levels[k].len();
                            u[k] = levels[k][r % m];
                            r /= m;
                        }
                        cont.push(u);
                    }
                }
                Layout::Axis => {
                    cont.push(vec![0.0; nu]);
                    for (k, lv) in levels.iter().enumerate() {
                        for &v in lv.iter().filter(|v| **v != 0.0) {
                            let mut u = vec![0.0; nu];
                            u[k] = v;
                            cont.push(u);
                        }
                    }
                }
            }
        }
        let mut seen = HashSet::new();
        cont.retain(|u| seen.insert(u.iter().map(|v| (v + 0.0).to_bits()).collect::<Vec<_>>()));

        let mut discrete: Vec<Vec<f64>> = vec![vec![]];
        for &k in &self.action_categories {
            discrete = discrete
                .into_iter()
                .flat_map(|d| {
                    (0..k).map(move |c| {
                        let mut e = d.clone();
                        e.push(c as f64);
                        e
                    })
                })
                .collect();
        }
        let mut out = Vec::with_capacity(discrete.len() * cont.len());
        for d in &discrete {
            for c in &cont {
                let mut u = c.clone();
                u.extend_from_slice(d);
                out.push(u);
            }
        }
        Ok(out)
    }
}
