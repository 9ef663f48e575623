//! Value iteration with tensor-train value functions, greedy policies, rollouts.

mod library;
mod policy;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use library::{Skill, SkillLibrary};
pub use policy::{
    rollout, sample_state, value_prediction_agreement, GreedyPolicy, Rollout,
};

use crate::skills::{CandidatePart, SkillKind, SkillMdp, SkillParams};
use crate::tt::{self, cross_indexed, CrossConfig, CrossState, DenseTable, Grid, TensorTrain};
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub grid: Vec<usize>,
    pub candidates: Vec<CandidatePart>,
    /// Stop once no grid node moves by more than this between iterations.
    pub eps: f64,
    pub max_rank: usize,
    pub max_iters: usize,
    pub pivot_tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn from_params(sp: &SkillParams, seed: u64) -> Self {
        Self {
            grid: sp.grid.clone(),
            candidates: sp.train_candidates.clone(),
            eps: sp.eps,
            max_rank: sp.max_rank,
            max_iters: sp.max_iters,
            pivot_tol: sp.pivot_tol,
            max_sweeps: sp.max_sweeps,
            seed,
        }
    }

    fn cross(&self) -> CrossConfig {
        CrossConfig {
            pivot_tol: self.pivot_tol,
            max_sweeps: self.max_sweeps,
            seed: self.seed,
            ..CrossConfig::new(self.eps, self.max_rank)
        }
    }
}

/// Training record stored next to a value function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueMeta {
    pub skill: SkillKind,
    pub gamma: f64,
    pub eps: f64,
    pub max_rank: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Largest node change in the final iteration.
    pub change: f64,
    pub evaluations: usize,
    pub ranks: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ValueFunction {
    pub meta: ValueMeta,
    tt: TensorTrain,
    table: DenseTable,
}

impl ValueFunction {
    pub fn new(tt: TensorTrain, meta: ValueMeta) -> Result<Self> {
        let table = DenseTable::from_tt(&tt)?;
        if table.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("{}: value function has non-finite entries", meta.skill)));
        }
        Ok(Self { meta, tt, table })
    }

    pub fn tt(&self) -> &TensorTrain {
        &self.tt
    }

    pub fn grid(&self) -> &Grid {
        self.tt.grid()
    }

    pub fn table(&self) -> &DenseTable {
        &self.table
    }

    /// Interpolated value; the point is clamped into the grid box first.
    pub fn value(&self, x: &[f64]) -> f64 {
        lookup(&self.table, x)
    }

    pub fn min(&self) -> f64 {
        self.table.min()
    }

    pub fn max(&self) -> f64 {
        self.table.max()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, tt::io::encode(&self.tt))?;
        std::fs::write(tt::io::sidecar_path(path), serde_json::to_vec_pretty(&self.meta)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let tt = tt::io::decode(&std::fs::read(path)?)?;
        let meta = serde_json::from_slice(&std::fs::read(tt::io::sidecar_path(path))?)?;
        Self::new(tt, meta)
    }
}

fn lookup(table: &DenseTable, x: &[f64]) -> f64 {
    let g = table.grid();
    let mut p = [0.0; 16];
    for (k, &v) in x.iter().enumerate() {
        p[k] = v.clamp(g.lower()[k], g.upper()[k]);
    }
    table.interpolate(&p[..x.len()]).expect("clamped point of matching dimension")
}

/// `max_u R(x, u) + gamma V(f(x, u))` and the index of the first maximizer.
pub fn bellman_backup(mdp: &SkillMdp, value: impl Fn(&[f64]) -> f64, cands: &[Vec<f64>], x: &[f64]) -> (f64, usize) {
    let base = mdp.state_cost(x);
    let mut y = [0.0; 16];
    let y = &mut y[..x.len()];
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, u) in cands.iter().enumerate() {
        mdp.step_into(x, u, y);
        let q = -(base + mdp.action_cost(x, u)) + mdp.gamma * value(y);
        if q > best.0 {
            best = (q, i);
        }
    }
    best
}

/// Value iteration where each sweep `V <- max_u R + gamma V o f` is compressed by TT-cross.
pub fn tt_value_iteration(mdp: &SkillMdp, cfg: &TrainConfig) -> Result<ValueFunction> {
    let grid = mdp.grid(&cfg.grid)?;
    let cands = mdp.candidates(&cfg.candidates)?;
    let size = grid.size().filter(|&s| s <= 1 << 26).ok_or_else(|| Error::Config("training grid too large".into()))?;
    let mut table = DenseTable::new(grid.clone(), vec![0.0; size as usize])?;
    let cross = cross_cfg_checked(cfg)?;

    let mut warm: Option<CrossState> = None;
    let mut meta = ValueMeta {
        skill: mdp.kind,
        gamma: mdp.gamma,
        eps: cfg.eps,
        max_rank: cfg.max_rank,
        iterations: 0,
        converged: false,
        change: f64::INFINITY,
        evaluations: 0,
        ranks: vec![],
        seed: cfg.seed,
    };
    let mut last: Option<TensorTrain> = None;
    for j in 0..cfg.max_iters {
        let oracle = |idx: &[usize]| {
            let mut x = [0.0; 16];
            let x = &mut x[..idx.len()];
            grid.point_into(idx, x);
            bellman_backup(mdp, |y| lookup(&table, y), &cands, x).0
        };
        let out = cross_indexed(oracle, &grid, &cross, warm.as_ref())
            .map_err(|e| Error::Iteration { iteration: j, source: Box::new(e) })?;
        let next = DenseTable::from_tt(&out.tt)?;
        let change = next
            .values()
            .iter()
            .zip(table.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if !change.is_finite() {
            return Err(Error::Iteration {
                iteration: j,
                source: Box::new(Error::Numeric("value iterate is not finite".into())),
            });
        }
        log::debug!(
            "{} iteration {}: change {change:.3e}, ranks {:?}, {} evaluations",
            mdp.kind,
            j + 1,
            out.tt.ranks(),
            out.report.evaluations
        );
        meta.iterations = j + 1;
        meta.change = change;
        meta.evaluations += out.report.evaluations;
        meta.ranks = out.tt.ranks();
        table = next;
        warm = Some(out.state);
        last = Some(out.tt);
        if change <= cfg.eps {
            meta.converged = true;
            break;
        }
    }
    let tt = last.ok_or_else(|| Error::Config("max_iters must be at least 1".into()))?;
    Ok(ValueFunction { meta, tt, table })
}

fn cross_cfg_checked(cfg: &TrainConfig) -> Result<CrossConfig> {
    if !(cfg.eps > 0.0) {
        return Err(Error::Config(format!("training eps must be positive, got {}", cfg.eps)));
    }
    Ok(cfg.cross())
}

/// Plain tabular value iteration on the same grid and candidates.
pub fn dense_value_iteration(
    mdp: &SkillMdp,
    grid: &Grid,
    cands: &[Vec<f64>],
    tol: f64,
    max_iters: usize,
) -> Result<(DenseTable, usize)> {
    let size = grid.size().filter(|&s| s <= 1 << 26).ok_or_else(|| Error::Config("grid too large".into()))? as usize;
    let mut table = DenseTable::new(grid.clone(), vec![0.0; size])?;
    let counts = grid.counts().to_vec();
    for it in 0..max_iters {
        let values = par::map_range(size, |flat| {
            let mut idx = [0usize; 16];
            let mut r = flat;
            for k in (0..counts.len()).rev() {
                idx[k] = r % counts[k];
                r /= counts[k];
            }
            let mut x = [0.0; 16];
            grid.point_into(&idx[..counts.len()], &mut x[..counts.len()]);
            bellman_backup(mdp, |y| lookup(&table, y), cands, &x[..counts.len()]).0
        });
        let change = values.iter().zip(table.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        table = DenseTable::new(grid.clone(), values)?;
        if change <= tol {
            return Ok((table, it + 1));
        }
    }
    Ok((table, max_iters))
}

/// Largest `|V(x) - max_u (R + gamma V(f(x, u)))|` over the given states.
pub fn bellman_residual(mdp: &SkillMdp, vf: &ValueFunction, cands: &[Vec<f64>], states: &[Vec<f64>]) -> f64 {
    par::map(states, |x| (vf.value(x) - bellman_backup(mdp, |y| vf.value(y), cands, x).0).abs())
        .into_iter()
        .fold(0.0, f64::max)
}
