use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{tt_value_iteration, GreedyPolicy, TrainConfig, ValueFunction};
use crate::skills::{DomainParams, SkillKind, SkillMdp, SkillParams};
use crate::{Error, Result};

const PARAMS_FILE: &str = "skills.json";

/// A trained skill: its MDP, settings, and value function.
#[derive(Debug, Clone)]
pub struct Skill {
    pub kind: SkillKind,
    pub params: SkillParams,
    pub mdp: SkillMdp,
    pub vf: ValueFunction,
}

impl Skill {
    pub fn train(kind: SkillKind, params: &DomainParams, seed: u64) -> Result<Self> {
        let sp = params.skill(kind)?.clone();
        let mdp = SkillMdp::new(kind, params)?;
        let vf = tt_value_iteration(&mdp, &TrainConfig::from_params(&sp, seed))?;
        Ok(Self { kind, params: sp, mdp, vf })
    }

    pub fn policy(&self) -> Result<GreedyPolicy<'_>> {
        GreedyPolicy::new(&self.mdp, &self.vf, &self.params.act_candidates)
    }
}

/// Trained skills sharing one parameter file, stored as a directory.
#[derive(Debug, Clone)]
pub struct SkillLibrary {
    pub params: DomainParams,
    skills: BTreeMap<SkillKind, Skill>,
}

impl SkillLibrary {
    pub fn new(params: DomainParams) -> Self {
        Self { params, skills: BTreeMap::new() }
    }

    pub fn insert(&mut self, skill: Skill) {
        self.skills.insert(skill.kind, skill);
    }

    pub fn contains(&self, kind: SkillKind) -> bool {
        self.skills.contains_key(&kind)
    }

    pub fn kinds(&self) -> impl Iterator<Item = SkillKind> + '_ {
        self.skills.keys().copied()
    }

    pub fn get(&self, kind: SkillKind) -> Result<&Skill> {
        self.skills
            .get(&kind)
            .ok_or_else(|| Error::Library(format!("no trained value function for skill '{kind}'")))
    }

    /// Fails listing every skill in `kinds` that is not trained.
    pub fn require(&self, kinds: impl IntoIterator<Item = SkillKind>) -> Result<()> {
        let mut missing: Vec<&str> = kinds.into_iter().filter(|k| !self.contains(*k)).map(|k| k.name()).collect();
        missing.sort_unstable();
        missing.dedup();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Library(format!("untrained skills: {}", missing.join(", "))))
        }
    }

    pub fn skill_path(dir: &Path, kind: SkillKind) -> PathBuf {
        dir.join(format!("{kind}.tt"))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(PARAMS_FILE), self.params.to_json())?;
        for s in self.skills.values() {
            s.vf.save(&Self::skill_path(dir, s.kind))?;
        }
        Ok(())
    }

    /// Load the parameter file and every skill whose value function is present.
    pub fn load(dir: &Path) -> Result<Self> {
        let pfile = dir.join(PARAMS_FILE);
        if !pfile.exists() {
            return Err(Error::Library(format!("{} has no {PARAMS_FILE}", dir.display())));
        }
        let params = DomainParams::load(&pfile)?;
        let mut lib = Self::new(params);
        for kind in SkillKind::ALL {
            let path = Self::skill_path(dir, kind);
            if !path.exists() || !lib.params.skills.contains_key(&kind) {
                continue;
            }
            let vf = ValueFunction::load(&path)?;
            let sp = lib.params.skill(kind)?.clone();
            let mdp = SkillMdp::new(kind, &lib.params)?;
            if vf.grid() != &mdp.grid(&sp.grid)? {
                return Err(Error::Library(format!("{}: grid differs from the parameter file", path.display())));
            }
            lib.insert(Skill { kind, params: sp, mdp, vf });
        }
        Ok(lib)
    }
}
