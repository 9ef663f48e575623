//! The planner: MCTS proposes skeletons, CEM picks their subgoals, rollouts
//! check them, and the outcome is fed back into the tree.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cem::{cem_optimize, CemConfig, Sample, VariableSpec};
use crate::skills::{gamma_map, phi_map, LongHorizonState, SkillKind};
use crate::symbolic::{replay, Carry, Mcts, SwitchConstraint, SymbolicDomain, SymbolicState};
use crate::value::{rollout, Skill, SkillLibrary};
use crate::{wrap_angle, Error, Result};

pub const DEFAULT_LAMBDA: f64 = -100.0;
/// Slack when checking switch constraints and inherited dims of given subgoals.
const CONSTRAINT_TOL: f64 = 1e-9;

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

/// On-disk problem. `domain` is a path relative to the file or `builtin:<name>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub domain: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub library: Option<String>,
    pub initial: Vec<f64>,
    /// Overrides the domain's initial symbolic state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_symbolic: Option<SymbolicState>,
    pub target: Vec<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub position_tol: f64,
    pub orientation_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub domain: SymbolicDomain,
    pub initial: Vec<f64>,
    pub symbolic: SymbolicState,
    pub target: Vec<f64>,
    /// Weight on the distance to the target; negative.
    pub lambda: f64,
    pub position_tol: f64,
    pub orientation_tol: f64,
}

impl Problem {
    pub fn new(domain: SymbolicDomain, initial: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        let p = Self {
            symbolic: domain.initial_state.clone(),
            domain,
            initial,
            target,
            lambda: DEFAULT_LAMBDA,
            position_tol: 0.05,
            orientation_tol: 0.3,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        let n = if self.domain.tool { 15 } else { 12 };
        for (name, v) in [("initial", &self.initial), ("target", &self.target)] {
            if v.len() != n {
                return Err(Error::Config(format!("{name} state has {} entries, domain '{}' needs {n}", v.len(), self.domain.name)));
            }
            LongHorizonState::check(v, f64::INFINITY)?;
        }
        if !(self.lambda.is_finite() && self.lambda != 0.0) {
            return Err(Error::Config(format!("lambda must be finite and non-zero, got {}", self.lambda)));
        }
        if !(self.position_tol > 0.0 && self.orientation_tol > 0.0) {
            return Err(Error::Config("solved thresholds must be positive".into()));
        }
        Ok(())
    }

    /// Load a problem file; returns the library directory it names, if any.
    pub fn load(path: &Path) -> Result<(Self, Option<PathBuf>)> {
        let text = std::fs::read_to_string(path)?;
        let file: ProblemFile =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let domain = match file.domain.strip_prefix("builtin:") {
            Some(name) => SymbolicDomain::builtin(name)?,
            None => SymbolicDomain::load(&base.join(&file.domain))?,
        };
        let p = Self {
            symbolic: file.initial_symbolic.unwrap_or_else(|| domain.initial_state.clone()),
            domain,
            initial: file.initial,
            target: file.target,
            lambda: file.lambda,
            position_tol: file.position_tol,
            orientation_tol: file.orientation_tol,
        };
        p.validate()?;
        Ok((p, file.library.map(|l| base.join(l))))
    }

    /// Largest position and angle errors against the target.
    pub fn errors(&self, x: &[f64]) -> (f64, f64) {
        component_errors(x, &self.target, 0..x.len())
    }

    pub fn meets_target(&self, x: &[f64]) -> bool {
        let (p, o) = self.errors(x);
        p <= self.position_tol && o <= self.orientation_tol
    }

    /// `lambda * |x - target|` with angles wrapped.
    pub fn psi(&self, x: &[f64]) -> f64 {
        self.lambda * LongHorizonState::distance(x, &self.target)
    }
}

fn component_errors(x: &[f64], y: &[f64], dims: impl Iterator<Item = usize>) -> (f64, f64) {
    let (mut p, mut o) = (0.0f64, 0.0f64);
    for d in dims {
        if LongHorizonState::is_angle(d) {
            o = o.max(wrap_angle(x[d] - y[d]).abs());
        } else {
            p = p.max((x[d] - y[d]).abs());
        }
    }
    (p, o)
}

fn settle(d: usize, v: f64) -> f64 {
    if LongHorizonState::is_angle(d) {
        wrap_angle(v)
    } else {
        v
    }
}

fn displacement(d: usize, to: f64, from: f64) -> f64 {
    settle(d, to - from)
}

#[derive(Debug, Clone)]
enum Slot {
    Continuous { dim: usize, var: usize },
    Choice { dim: usize, var: usize },
    Fixed { dim: usize, value: f64 },
    Match { dim: usize, source: usize, offset: f64 },
}

#[derive(Debug, Clone)]
struct Step<'a> {
    operator: String,
    skill: &'a Skill,
    slots: Vec<Slot>,
    constraints: Vec<SwitchConstraint>,
    actuated: Vec<usize>,
    carry: Vec<Carry>,
}

/// Value, target and box terms of an objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Terms {
    pub values: Vec<f64>,
    pub psi: f64,
    /// Penalty for subgoals outside a skill's state box or the workspace.
    pub penalty: f64,
}

impl Terms {
    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() + self.psi + self.penalty
    }
}

/// `sum_k V_k(Gamma_k(x_{k-1}, x_k)) + Psi(x_K)` over the actuated dims of a skeleton.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    problem: &'a Problem,
    steps: Vec<Step<'a>>,
    bound: f64,
    pub skeleton: Vec<usize>,
    pub spec: VariableSpec,
}

pub fn build_objective<'a>(problem: &'a Problem, lib: &'a SkillLibrary, skeleton: &[usize]) -> Result<Objective<'a>> {
    replay(&problem.symbolic, &problem.domain.operators, skeleton)?;
    let ops: Vec<_> = skeleton.iter().map(|&i| &problem.domain.operators[i]).collect();
    let kinds = ops.iter().map(|o| o.skill()).collect::<Result<Vec<SkillKind>>>()?;
    lib.require(kinds.iter().copied())?;
    let bound = lib.params.position_bound;
    let (mut lower, mut upper, mut categories) = (Vec::new(), Vec::new(), Vec::new());
    let mut steps = Vec::new();
    for (op, kind) in ops.iter().zip(kinds) {
        let skill = lib.get(kind)?;
        if let Some(d) = op.actuated.iter().find(|d| !skill.params.dims.contains(d)) {
            return Err(Error::Config(format!("operator '{}' actuates dim {d}, which skill '{kind}' does not control", op.name)));
        }
        let mut slots = Vec::new();
        for &dim in &op.actuated {
            let (lo, hi) = if LongHorizonState::is_angle(dim) { (-std::f64::consts::PI, std::f64::consts::PI) } else { (-bound, bound) };
            let slot = match op.constraint(dim) {
                None => {
                    lower.push(lo);
                    upper.push(hi);
                    Slot::Continuous { dim, var: lower.len() - 1 }
                }
                Some(SwitchConstraint::Interval { lower: l, upper: u, .. }) => {
                    let (l, u) = (l.max(lo), u.min(hi));
                    if l > u {
                        return Err(Error::Config(format!("operator '{}': interval on dim {dim} misses the workspace", op.name)));
                    }
                    lower.push(l);
                    upper.push(u);
                    Slot::Continuous { dim, var: lower.len() - 1 }
                }
                Some(SwitchConstraint::Discrete { values, .. }) => {
                    categories.push(values.clone());
                    Slot::Choice { dim, var: categories.len() - 1 }
                }
                Some(SwitchConstraint::Fixed { value, .. }) => Slot::Fixed { dim, value: *value },
                Some(SwitchConstraint::Match { source, offset, .. }) => Slot::Match { dim, source: *source, offset: *offset },
            };
            slots.push(slot);
        }
        steps.push(Step {
            operator: op.name.clone(),
            skill,
            slots,
            constraints: op.constraints.clone(),
            actuated: op.actuated.clone(),
            carry: op.carry.clone(),
        });
    }
    let spec = VariableSpec { lower, upper, categories };
    Ok(Objective { problem, steps, bound, skeleton: skeleton.to_vec(), spec })
}

impl Objective<'_> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn operator_names(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.operator.clone()).collect()
    }

    /// Subgoal sequence for a sample of the decision variables.
    pub fn decode(&self, sample: &Sample) -> Vec<Vec<f64>> {
        let mut prev = self.problem.initial.clone();
        let mut out = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            let mut x = prev.clone();
            for slot in &step.slots {
                match *slot {
                    Slot::Continuous { dim, var } => x[dim] = sample.x[var],
                    Slot::Choice { dim, var } => x[dim] = self.spec.categories[var][sample.k[var]],
                    Slot::Fixed { dim, value } => x[dim] = value,
                    Slot::Match { dim, source, offset } => x[dim] = settle(dim, prev[source] + offset),
                }
            }
            for c in &step.carry {
                x[c.dim] = settle(c.dim, prev[c.dim] + displacement(c.source, x[c.source], prev[c.source]));
            }
            out.push(x.clone());
            prev = x;
        }
        out
    }

    pub fn terms(&self, subgoals: &[Vec<f64>]) -> Terms {
        let weight = self.problem.lambda.abs();
        let mut prev = &self.problem.initial;
        let mut values = Vec::with_capacity(self.steps.len());
        let mut penalty = 0.0;
        for (step, x) in self.steps.iter().zip(subgoals) {
            let s = gamma_map(&step.skill.mdp, &step.skill.params.dims, prev, x);
            penalty -= weight * step.skill.mdp.box_excess(&s);
            penalty -= weight * workspace_excess(x, self.bound);
            values.push(step.skill.vf.value(&s));
            prev = x;
        }
        let last = subgoals.last().unwrap_or(&self.problem.initial);
        Terms { values, psi: self.problem.psi(last), penalty }
    }

    pub fn score(&self, subgoals: &[Vec<f64>]) -> f64 {
        self.terms(subgoals).total()
    }

    pub fn evaluate(&self, sample: &Sample) -> f64 {
        self.score(&self.decode(sample))
    }

    /// `Psi` plus the box penalties, ignoring skill values.
    pub fn feasibility(&self, sample: &Sample) -> f64 {
        let t = self.terms(&self.decode(sample));
        t.psi + t.penalty
    }

    /// Per-skill values mapped affinely onto `[0, 1]` by each value function's range.
    pub fn normalized_rewards(&self, subgoals: &[Vec<f64>]) -> Vec<f64> {
        let t = self.terms(subgoals);
        self.steps
            .iter()
            .zip(t.values)
            .map(|(step, v)| {
                let (lo, hi) = (step.skill.vf.min(), step.skill.vf.max());
                if hi > lo {
                    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    1.0
                }
            })
            .collect()
    }
}

fn workspace_excess(x: &[f64], bound: f64) -> f64 {
    x.iter()
        .enumerate()
        .filter(|(d, _)| !LongHorizonState::is_angle(*d))
        .map(|(_, v)| (v.abs() - bound).max(0.0).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillReport {
    pub operator: String,
    pub skill: SkillKind,
    pub steps: usize,
    /// Skill-level success at the end of its rollout.
    pub success: bool,
    pub cumulative: f64,
    /// Largest position and angle error of the achieved state against the subgoal.
    pub position_error: f64,
    pub orientation_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub solved: bool,
    /// 1 when solved, else 0.
    pub reward: f64,
    pub achieved: Vec<f64>,
    pub position_error: f64,
    pub orientation_error: f64,
    pub skills: Vec<SkillReport>,
    /// Symbolic or switch-constraint problems found before execution.
    pub violations: Vec<String>,
}

impl Verification {
    fn failed(problem: &Problem, violations: Vec<String>) -> Self {
        let (p, o) = problem.errors(&problem.initial);
        Self {
            solved: false,
            reward: 0.0,
            achieved: problem.initial.clone(),
            position_error: p,
            orientation_error: o,
            skills: Vec::new(),
            violations,
        }
    }
}

/// Check a skeleton and subgoals symbolically, against the switch constraints,
/// then by running each skill's greedy policy towards its subgoal.
pub fn verify_solution(problem: &Problem, lib: &SkillLibrary, skeleton: &[usize], subgoals: &[Vec<f64>]) -> Result<Verification> {
    if let Err(e) = replay(&problem.symbolic, &problem.domain.operators, skeleton) {
        return Ok(Verification::failed(problem, vec![e.to_string()]));
    }
    if subgoals.len() != skeleton.len() {
        return Ok(Verification::failed(
            problem,
            vec![format!("{} subgoals for {} operators", subgoals.len(), skeleton.len())],
        ));
    }
    let obj = build_objective(problem, lib, skeleton)?;
    let violations = constraint_violations(&obj, subgoals);
    if !violations.is_empty() {
        return Ok(Verification::failed(problem, violations));
    }

    let mut x = problem.initial.clone();
    let mut reports = Vec::new();
    let mut feasible = true;
    for (step, goal) in obj.steps.iter().zip(subgoals) {
        let sk = step.skill;
        let dims = &sk.params.dims;
        let s = gamma_map(&sk.mdp, dims, &x, goal);
        if sk.mdp.box_excess(&s) > CONSTRAINT_TOL {
            reports.push(SkillReport {
                operator: step.operator.clone(),
                skill: sk.kind,
                steps: 0,
                success: false,
                cumulative: f64::NEG_INFINITY,
                position_error: f64::INFINITY,
                orientation_error: f64::INFINITY,
            });
            feasible = false;
            break;
        }
        let policy = sk.policy()?;
        let r = rollout(&sk.mdp, &policy, &s, sk.params.horizon);
        let mut next = phi_map(&sk.mdp, dims, r.last(), goal);
        for d in 0..next.len() {
            if !dims.contains(&d) {
                next[d] = x[d];
            }
        }
        for c in &step.carry {
            next[c.dim] = settle(c.dim, x[c.dim] + displacement(c.source, next[c.source], x[c.source]));
        }
        let (pe, oe) = component_errors(&next, goal, dims.iter().copied());
        reports.push(SkillReport {
            operator: step.operator.clone(),
            skill: sk.kind,
            steps: r.states.len() - 1,
            success: r.success,
            cumulative: r.cumulative,
            position_error: pe,
            orientation_error: oe,
        });
        x = next;
    }
    let (pe, oe) = problem.errors(&x);
    let solved = feasible && pe <= problem.position_tol && oe <= problem.orientation_tol;
    Ok(Verification {
        solved,
        reward: f64::from(u8::from(solved)),
        achieved: x,
        position_error: pe,
        orientation_error: oe,
        skills: reports,
        violations: Vec::new(),
    })
}

fn constraint_violations(obj: &Objective<'_>, subgoals: &[Vec<f64>]) -> Vec<String> {
    let mut out = Vec::new();
    let bound = obj.bound;
    let mut prev = &obj.problem.initial;
    for (step, x) in obj.steps.iter().zip(subgoals) {
        let name = &step.operator;
        if x.len() != prev.len() {
            out.push(format!("{name}: subgoal has {} entries, expected {}", x.len(), prev.len()));
            return out;
        }
        if let Err(e) = LongHorizonState::check(x, bound) {
            out.push(format!("{name}: {e}"));
        }
        for c in &step.constraints {
            if !c.satisfied(prev, x, CONSTRAINT_TOL) {
                out.push(format!("{name}: violates {}", c.describe()));
            }
        }
        for d in 0..x.len() {
            if step.actuated.contains(&d) {
                continue;
            }
            let want = match step.carry.iter().find(|c| c.dim == d) {
                Some(c) => settle(d, prev[d] + displacement(c.source, x[c.source], prev[c.source])),
                None => prev[d],
            };
            if displacement(d, x[d], want).abs() > CONSTRAINT_TOL {
                out.push(format!("{name}: {} changed but is not actuated", LongHorizonState::dim_name(d)));
            }
        }
        prev = x;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LspConfig {
    /// Outer iterations, one skeleton each.
    pub iterations: usize,
    pub max_solutions: usize,
    /// UCB1 exploration constant.
    pub explore: f64,
    pub max_len: usize,
    pub cem: CemConfig,
    pub seed: u64,
}

impl Default for LspConfig {
    fn default() -> Self {
        Self { iterations: 100, max_solutions: 5, explore: 3.0, max_len: 6, cem: CemConfig::default(), seed: 0 }
    }
}

impl LspConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.max_solutions == 0 || self.max_len == 0 {
            return Err(Error::Config("iterations, max_solutions and max_len must be positive".into()));
        }
        if !(self.explore >= 0.0) {
            return Err(Error::Config(format!("exploration constant must be non-negative, got {}", self.explore)));
        }
        self.cem.validate()
    }

    /// CEM settings for the `iteration`-th skeleton.
    pub fn cem_for(&self, iteration: usize) -> CemConfig {
        CemConfig { seed: mix(self.seed, iteration as u64), ..self.cem.clone() }
    }
}

fn mix(seed: u64, i: u64) -> u64 {
    let mut z = seed ^ i.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub skeleton: Vec<String>,
    pub subgoals: Vec<Vec<f64>>,
    /// Objective value at the subgoals.
    pub score: f64,
    pub rewards: Vec<f64>,
    /// Sum of `rewards`; at most the skeleton length.
    pub normalized_reward: f64,
    pub solved: bool,
    pub skills: Vec<SkillReport>,
}

impl Solution {
    pub fn from_subgoals(obj: &Objective<'_>, subgoals: Vec<Vec<f64>>, check: &Verification) -> Self {
        let rewards = obj.normalized_rewards(&subgoals);
        Self {
            skeleton: obj.operator_names(),
            score: obj.score(&subgoals),
            normalized_reward: rewards.iter().sum(),
            rewards,
            subgoals,
            solved: check.solved,
            skills: check.skills.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub proposals: usize,
    pub tree_nodes: usize,
    pub evaluations: usize,
    /// Best objective among candidates that failed verification.
    pub best_infeasible: Option<f64>,
    pub best_infeasible_skeleton: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolutionSet {
    pub solutions: Vec<Solution>,
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub diagnostics: Diagnostics,
}

impl SolutionSet {
    /// Highest-scoring solution.
    pub fn best(&self) -> Option<&Solution> {
        self.solutions.iter().max_by(|a, b| a.score.total_cmp(&b.score))
    }

    fn push(&mut self, s: Solution) {
        if !self.solutions.contains(&s) {
            self.scores.push(s.score);
            self.solutions.push(s);
        }
    }
}

/// Plan without a symbolic goal: search skeletons, optimize each, keep those
/// whose execution reaches the target.
pub fn lsp_solve(problem: &Problem, lib: &SkillLibrary, cfg: &LspConfig) -> Result<SolutionSet> {
    cfg.validate()?;
    problem.validate()?;
    lib.require(problem.domain.operators.iter().map(|o| o.skill()).collect::<Result<Vec<_>>>()?)?;
    let mut out = SolutionSet::default();
    if problem.meets_target(&problem.initial) {
        let (pe, oe) = problem.errors(&problem.initial);
        out.push(Solution {
            skeleton: Vec::new(),
            subgoals: Vec::new(),
            score: problem.psi(&problem.initial),
            rewards: Vec::new(),
            normalized_reward: 0.0,
            solved: true,
            skills: Vec::new(),
        });
        log::debug!("initial state already within thresholds ({pe:.3}, {oe:.3})");
        return Ok(out);
    }
    let ops = &problem.domain.operators;
    let mut tree = Mcts::new(problem.symbolic.clone(), ops, cfg.max_len, cfg.explore, cfg.seed).revisiting();
    for it in 0..cfg.iterations {
        let Some(prop) = tree.propose() else { break };
        out.iterations = it + 1;
        out.diagnostics.proposals += 1;
        let obj = build_objective(problem, lib, &prop.skeleton)?;
        let res = cem_optimize(|s| obj.evaluate(s), &obj.spec, &cfg.cem_for(it))?;
        out.diagnostics.evaluations += res.evaluations;
        let subgoals = obj.decode(&res.best);
        let check = verify_solution(problem, lib, &prop.skeleton, &subgoals)?;
        log::debug!(
            "iteration {it}: {} J = {:.4} solved = {}",
            obj.operator_names().join(" "),
            res.score,
            check.solved
        );
        tree.backprop(prop.node, check.reward);
        if check.solved {
            out.push(Solution::from_subgoals(&obj, subgoals, &check));
            if out.solutions.len() >= cfg.max_solutions {
                break;
            }
        } else if out.diagnostics.best_infeasible.map_or(true, |b| res.score > b) {
            out.diagnostics.best_infeasible = Some(res.score);
            out.diagnostics.best_infeasible_skeleton = obj.operator_names();
        }
    }
    out.diagnostics.tree_nodes = tree.nodes.len();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skills::DomainParams;
    use std::sync::OnceLock;

    /// Coarse pull and pivot skills, shared by the tests below.
    fn library() -> &'static SkillLibrary {
        static LIB: OnceLock<SkillLibrary> = OnceLock::new();
        LIB.get_or_init(|| {
            let mut p = DomainParams::default();
            let pv = p.skills.get_mut(&SkillKind::Pivot).unwrap();
            pv.grid = vec![33, 33];
            pv.action_max = vec![4.0 * 2.0 * std::f64::consts::PI / 32.0 / 0.1];
            let mut lib = SkillLibrary::new(p.clone());
            for k in [SkillKind::Pivot, SkillKind::Pull] {
                lib.insert(Skill::train(k, &p, 0).unwrap());
            }
            lib
        })
    }

    fn pull_domain() -> SymbolicDomain {
        let text = r#"{
            "name": "slide", "predicates": ["Moved", "Flipped"], "entities": {"o": "object"},
            "initial_state": [],
            "operators": [
                {"name": "pull_any", "pre_not": ["(Moved o)"], "add": ["(Moved o)"], "actuated": [0, 1, 5]},
                {"name": "pivot", "pre": ["(Moved o)"], "add": ["(Flipped o)"], "actuated": [3]}
            ]
        }"#;
        SymbolicDomain::from_json(text).unwrap()
    }

    fn obj_state(x: f64, y: f64, roll: f64, yaw: f64) -> Vec<f64> {
        let mut v = vec![0.0; 12];
        v[0] = x;
        v[1] = y;
        v[3] = roll;
        v[5] = yaw;
        v
    }

    #[test]
    fn zero_displacement_is_optimal_when_already_there() {
        let lib = library();
        let x = obj_state(0.1, 0.1, 0.0, 0.0);
        let p = Problem::new(pull_domain(), x.clone(), x.clone()).unwrap();
        let obj = build_objective(&p, lib, &[0]).unwrap();
        assert_eq!(obj.spec.continuous_dim(), 3);
        let r = cem_optimize(|s| obj.evaluate(s), &obj.spec, &CemConfig::default()).unwrap();
        assert!(r.score > -0.05, "{}", r.score);
        let sg = obj.decode(&r.best);
        assert!(LongHorizonState::distance(&sg[0], &x) < 0.01);
    }

    #[test]
    fn score_recomposes_by_hand() {
        let lib = library();
        let p = Problem::new(pull_domain(), obj_state(0.1, 0.1, 0.0, 0.0), obj_state(-0.1, 0.0, 0.5, 0.2)).unwrap();
        let obj = build_objective(&p, lib, &[0, 1]).unwrap();
        let sample = Sample { x: vec![-0.05, 0.02, 0.3, 0.4], k: vec![] };
        let sg = obj.decode(&sample);
        assert_eq!(sg[0], obj_state(-0.05, 0.02, 0.0, 0.3));
        assert_eq!(sg[1], obj_state(-0.05, 0.02, 0.4, 0.3));
        let pull = lib.get(SkillKind::Pull).unwrap();
        let pivot = lib.get(SkillKind::Pivot).unwrap();
        let v1 = pull.vf.value(&[0.15, 0.08, -0.3]);
        let v2 = pivot.vf.value(&[0.0, 0.4]);
        let dist = (0.05f64.powi(2) + 0.02f64.powi(2) + 0.1f64.powi(2) + 0.1f64.powi(2)).sqrt();
        let by_hand = v1 + v2 - 100.0 * dist;
        assert!((obj.evaluate(&sample) - by_hand).abs() < 1e-9);
    }

    #[test]
    fn leaving_a_skill_box_is_penalized() {
        let lib = library();
        let p = Problem::new(pull_domain(), obj_state(0.45, 0.0, 0.0, 0.0), obj_state(-0.45, 0.0, 0.0, 0.0)).unwrap();
        let obj = build_objective(&p, lib, &[0]).unwrap();
        let t = obj.terms(&[obj_state(-0.45, 0.0, 0.0, 0.0)]);
        assert!((t.penalty + 100.0 * 0.4).abs() < 1e-9);
        assert_eq!(t.psi, 0.0);
    }

    #[test]
    fn empty_skeleton_when_already_solved() {
        let x = obj_state(0.0, 0.0, 0.0, 0.0);
        let p = Problem::new(pull_domain(), x.clone(), x).unwrap();
        let set = lsp_solve(&p, library(), &LspConfig::default()).unwrap();
        assert_eq!(set.solutions.len(), 1);
        assert!(set.solutions[0].skeleton.is_empty() && set.solutions[0].solved);
        let v = verify_solution(&p, library(), &[], &[]).unwrap();
        assert!(v.solved && v.reward == 1.0);
    }

    #[test]
    fn pull_then_pivot_is_solved() {
        let lib = library();
        let p = Problem::new(pull_domain(), obj_state(0.15, -0.1, 0.0, 0.3), obj_state(-0.1, 0.1, 0.8, -0.2)).unwrap();
        let cfg = LspConfig { max_solutions: 1, cem: CemConfig { population: 300, ..CemConfig::default() }, ..LspConfig::default() };
        let set = lsp_solve(&p, lib, &cfg).unwrap();
        let best = set.best().expect("a solution");
        assert_eq!(best.skeleton, vec!["pull_any", "pivot"]);
        assert!(best.normalized_reward <= 2.0 && best.normalized_reward > 1.5);
        let idx = p.domain.skeleton_from_names(&best.skeleton).unwrap();
        let v = verify_solution(&p, lib, &idx, &best.subgoals).unwrap();
        assert!(v.solved);
        let obj = build_objective(&p, lib, &idx).unwrap();
        assert!((obj.score(&best.subgoals) - best.score).abs() < 1e-9);
    }

    #[test]
    fn pull_alone_cannot_reach_a_roll_target() {
        let lib = library();
        let p = Problem::new(pull_domain(), obj_state(0.1, 0.0, 0.0, 0.0), obj_state(0.0, 0.0, 1.0, 0.0)).unwrap();
        let obj = build_objective(&p, lib, &[0]).unwrap();
        let r = cem_optimize(|s| obj.evaluate(s), &obj.spec, &CemConfig { population: 200, ..CemConfig::default() }).unwrap();
        let v = verify_solution(&p, lib, &[0], &obj.decode(&r.best)).unwrap();
        assert!(!v.solved);
        assert_eq!(v.reward, 0.0);
    }

    #[test]
    fn tampered_subgoals_are_reported() {
        let lib = library();
        let p = Problem::new(pull_domain(), obj_state(0.1, 0.0, 0.0, 0.0), obj_state(0.0, 0.0, 1.0, 0.0)).unwrap();
        let mut sg = vec![obj_state(0.0, 0.0, 0.0, 0.0), obj_state(0.0, 0.0, 1.0, 0.0)];
        sg[1][0] = 0.2;
        let v = verify_solution(&p, lib, &[0, 1], &sg).unwrap();
        assert!(!v.solved);
        assert!(v.violations[0].contains("object.x"), "{:?}", v.violations);
        let v = verify_solution(&p, lib, &[1], &sg[..1]).unwrap();
        assert!(!v.violations.is_empty());
    }

    #[test]
    fn missing_skills_are_named() {
        let p = Problem::new(SymbolicDomain::builtin("pm").unwrap(), vec![0.0; 15], vec![0.1; 15]);
        let err = lsp_solve(&p.unwrap(), library(), &LspConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Library(_)));
        assert!(err.to_string().contains("pick") && err.to_string().contains("place"));
    }
}
