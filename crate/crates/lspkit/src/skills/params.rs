use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CandidatePart, ContactParams, SkillKind};
use crate::{Error, Result};

/// Per-skill training and execution settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillParams {
    /// Long-horizon dims the skill reads and writes.
    pub dims: Vec<usize>,
    pub rho: f64,
    /// Symmetric speed limits: linear first, then angular (push: pusher speed only).
    pub action_max: Vec<f64>,
    /// Training grid nodes per state dim.
    pub grid: Vec<usize>,
    pub train_candidates: Vec<CandidatePart>,
    /// Candidates for the greedy policy at execution time.
    pub act_candidates: Vec<CandidatePart>,
    pub eps: f64,
    pub max_rank: usize,
    pub max_iters: usize,
    /// TT-cross sweeps per value iteration.
    pub max_sweeps: usize,
    /// Skeleton truncation inside each TT-cross call.
    pub pivot_tol: f64,
    pub horizon: usize,
}

/// Skill domain parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainParams {
    pub dt: f64,
    pub gamma: f64,
    pub l_p: f64,
    pub l_o: f64,
    pub position_bound: f64,
    pub contact: ContactParams,
    pub skills: BTreeMap<SkillKind, SkillParams>,
}

/// Speed that moves `steps` grid cells per time step.
fn cell_speed(range: f64, count: usize, steps: f64, dt: f64) -> f64 {
    steps * range / (count - 1) as f64 / dt
}

impl Default for DomainParams {
    fn default() -> Self {
        let dt = 0.1;
        let fine = |n: usize| CandidatePart::axis(vec![9; n], 1.0 / 16.0);
        let mut skills = BTreeMap::new();
        skills.insert(
            SkillKind::Push,
            SkillParams {
                dims: vec![0, 1, 5],
                rho: 0.5,
                action_max: vec![0.25],
                grid: vec![21, 21, 25, 5, 4],
                train_candidates: vec![CandidatePart::product(vec![3, 5])],
                act_candidates: vec![
                    CandidatePart::product(vec![3, 5]),
                    CandidatePart { scale: 0.25, ..CandidatePart::product(vec![3, 5]) },
                ],
                eps: 1e-3,
                max_rank: 20,
                max_iters: 30,
                max_sweeps: 2,
                pivot_tol: 1e-4,
                horizon: 200,
            },
        );
        skills.insert(
            SkillKind::Pivot,
            SkillParams {
                dims: vec![3],
                rho: 1.0,
                action_max: vec![cell_speed(2.0 * PI, 64, 4.0, dt)],
                grid: vec![64, 64],
                train_candidates: vec![CandidatePart::product(vec![9])],
                act_candidates: vec![CandidatePart::product(vec![9]), fine(1)],
                eps: 1e-3,
                max_rank: 100,
                max_iters: 100,
                max_sweeps: 25,
                pivot_tol: 1e-8,
                horizon: 200,
            },
        );
        skills.insert(
            SkillKind::Pull,
            SkillParams {
                dims: vec![0, 1, 5],
                rho: 1.0,
                action_max: vec![cell_speed(1.0, 33, 4.0, dt), cell_speed(2.0 * PI, 33, 4.0, dt)],
                grid: vec![33, 33, 33],
                train_candidates: vec![CandidatePart::product(vec![9, 9, 9])],
                act_candidates: vec![CandidatePart::product(vec![9, 9, 9]), fine(3)],
                eps: 1e-3,
                max_rank: 100,
                max_iters: 100,
                max_sweeps: 25,
                pivot_tol: 1e-6,
                horizon: 200,
            },
        );
        let pick = SkillParams {
            dims: (6..12).collect(),
            rho: 1.0,
            action_max: vec![cell_speed(1.0, 13, 4.0, dt), cell_speed(2.0 * PI, 13, 4.0, dt)],
            grid: vec![13; 6],
            train_candidates: vec![CandidatePart::axis(vec![9; 6], 1.0)],
            act_candidates: vec![CandidatePart::axis(vec![9; 6], 1.0), fine(6)],
            eps: 1e-3,
            max_rank: 100,
            max_iters: 100,
                max_sweeps: 25,
            pivot_tol: 1e-6,
            horizon: 200,
        };
        skills.insert(SkillKind::Pick, pick.clone());
        skills.insert(SkillKind::Place, pick);
        Self { dt, gamma: 0.99, l_p: 0.5, l_o: PI, position_bound: 0.5, contact: ContactParams::default(), skills }
    }
}

impl DomainParams {
    pub fn skill(&self, kind: SkillKind) -> Result<&SkillParams> {
        self.skills
            .get(&kind)
            .ok_or_else(|| Error::Config(format!("skill '{kind}' missing from domain parameters")))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.position_bound > 0.0 && self.position_bound.is_finite()) {
            return Err(Error::Config("position_bound must be positive".into()));
        }
        for (&kind, sp) in &self.skills {
            let want = match kind {
                SkillKind::Pivot => 1,
                SkillKind::Push | SkillKind::Pull => 3,
                SkillKind::Pick | SkillKind::Place => 6,
            };
            if sp.dims.len() != want {
                return Err(Error::Config(format!("{kind}: dims needs {want} entries, got {}", sp.dims.len())));
            }
            if sp.dims.iter().any(|&d| d >= super::maps::MAX_DIM) {
                return Err(Error::Config(format!("{kind}: dims out of range")));
            }
            if !(sp.eps > 0.0) || sp.max_rank == 0 || sp.max_iters == 0 || sp.max_sweeps == 0 || sp.horizon == 0 {
                return Err(Error::Config(format!("{kind}: eps, max_rank, max_iters, max_sweeps, horizon must be positive")));
            }
            if sp.action_max.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                return Err(Error::Config(format!("{kind}: action_max entries must be positive")));
            }
            let mdp = super::SkillMdp::new(kind, self)?;
            mdp.grid(&sp.grid)?;
            mdp.candidates(&sp.train_candidates)?;
            mdp.candidates(&sp.act_candidates)?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| Error::Format(format!("domain parameters: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let p = DomainParams::default();
        p.validate().unwrap();
        let q = DomainParams::from_json(&p.to_json()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn integrator_speeds_step_whole_cells() {
        let p = DomainParams::default();
        let pivot = p.skill(SkillKind::Pivot).unwrap();
        let h = 2.0 * PI / 63.0;
        assert!((pivot.action_max[0] * p.dt - 4.0 * h).abs() < 1e-12);
    }

    #[test]
    fn parse_errors_name_the_location() {
        let err = DomainParams::from_json("{\n  \"dt\": \"fast\"\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn missing_skill_is_a_config_error() {
        let mut p = DomainParams::default();
        p.skills.remove(&SkillKind::Push);
        assert!(matches!(p.skill(SkillKind::Push), Err(Error::Config(_))));
    }
}
