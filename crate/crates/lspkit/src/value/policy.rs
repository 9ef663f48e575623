use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bellman_backup, ValueFunction};
use crate::skills::{CandidatePart, SkillMdp};
use crate::{par, Error, Result};

/// One-step lookahead on a value function over a fixed candidate set.
#[derive(Debug, Clone)]
pub struct GreedyPolicy<'a> {
    pub mdp: &'a SkillMdp,
    pub vf: &'a ValueFunction,
    candidates: Vec<Vec<f64>>,
}

impl<'a> GreedyPolicy<'a> {
    pub fn new(mdp: &'a SkillMdp, vf: &'a ValueFunction, parts: &[CandidatePart]) -> Result<Self> {
        if vf.grid().dim() != mdp.state_dim() {
            return Err(Error::Config(format!(
                "{}: value function has {} dims, state has {}",
                mdp.kind,
                vf.grid().dim(),
                mdp.state_dim()
            )));
        }
        Ok(Self { mdp, vf, candidates: mdp.candidates(parts)? })
    }

    pub fn candidates(&self) -> &[Vec<f64>] {
        &self.candidates
    }

    /// Index of the first candidate maximizing `R(x, u) + gamma V(f(x, u))`.
    pub fn act_index(&self, x: &[f64]) -> usize {
        bellman_backup(self.mdp, |y| self.vf.value(y), &self.candidates, x).1
    }

    pub fn act(&self, x: &[f64]) -> &[f64] {
        &self.candidates[self.act_index(x)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    /// Discounted sum of rewards.
    pub cumulative: f64,
    /// Final state within the skill's success tolerances.
    pub success: bool,
}

impl Rollout {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("rollout holds its start state")
    }
}

/// Run the policy for up to `horizon` steps. A state the policy does not move
/// will repeat forever, so its remaining rewards are summed in closed form.
pub fn rollout(mdp: &SkillMdp, policy: &GreedyPolicy<'_>, x0: &[f64], horizon: usize) -> Rollout {
    let mut x = x0.to_vec();
    let mut states = vec![x.clone()];
    let mut actions = Vec::new();
    let mut total = 0.0;
    let mut disc = 1.0;
    for t in 0..horizon {
        let u = policy.act(&x).to_vec();
        let r = mdp.reward(&x, &u);
        let y = mdp.step(&x, &u);
        if y == x {
            let rest = (horizon - t) as i32;
            total += disc * r * (1.0 - mdp.gamma.powi(rest)) / (1.0 - mdp.gamma);
            break;
        }
        total += disc * r;
        disc *= mdp.gamma;
        x = y;
        states.push(x.clone());
        actions.push(u);
    }
    let success = mdp.is_success(&x);
    Rollout { states, actions, cumulative: total, success }
}

/// Uniform state in the skill's box; discrete dims pick a category uniformly.
pub fn sample_state(mdp: &SkillMdp, rng: &mut impl Rng) -> Vec<f64> {
    let mut x: Vec<f64> = mdp
        .state_lower
        .iter()
        .zip(&mdp.state_upper)
        .map(|(&lo, &hi)| rng.random_range(lo..=hi))
        .collect();
    x.extend(mdp.state_categories.iter().map(|&k| rng.random_range(0..k) as f64));
    x
}

/// Fraction of random state pairs where `value` orders the pair like `returns`.
///
/// Pairs whose returns differ by less than 1e-6 are skipped and replaced.
pub fn value_prediction_agreement<V, R>(mdp: &SkillMdp, value: V, returns: R, n_pairs: usize, seed: u64) -> Result<f64>
where
    V: Fn(&[f64]) -> f64 + Sync,
    R: Fn(&[f64]) -> f64 + Sync,
{
    if n_pairs == 0 {
        return Err(Error::Config("need at least one pair".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut used, mut agree) = (0usize, 0usize);
    for _ in 0..64 {
        let want = (n_pairs - used) + (n_pairs - used) / 4 + 4;
        let states: Vec<Vec<f64>> = (0..2 * want).map(|_| sample_state(mdp, &mut rng)).collect();
        let scored = par::map(&states, |x| (value(x), returns(x)));
        for pair in scored.chunks(2) {
            let ((v1, r1), (v2, r2)) = (pair[0], pair[1]);
            if (r1 - r2).abs() < 1e-6 {
                continue;
            }
            let dv = v1 - v2;
            if dv != 0.0 && (dv > 0.0) == (r1 > r2) {
                agree += 1;
            }
            used += 1;
            if used == n_pairs {
                return Ok(agree as f64 / n_pairs as f64);
            }
        }
    }
    Err(Error::Numeric("returns are too flat to form distinguishable pairs".into()))
}
