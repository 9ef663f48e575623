use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{applicable, succ, Condition, Operator, SymbolicState};
use crate::Result;

/// Select-expand passes tried per proposal before giving up.
const MAX_ATTEMPTS: usize = 10_000;

/// `w/v + c sqrt(ln N / v)`; unvisited children score infinity.
pub fn ucb1(w: f64, v: u64, parent_visits: u64, c: f64) -> f64 {
    if v == 0 {
        return f64::INFINITY;
    }
    let n = parent_visits.max(1) as f64;
    w / v as f64 + c * (n.ln() / v as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct MctsNode {
    pub state: SymbolicState,
    pub parent: Option<usize>,
    /// Operator leading here from the parent.
    pub op: Option<usize>,
    pub children: Vec<usize>,
    untried: Vec<usize>,
    pub visits: u64,
    pub total: f64,
    pub depth: usize,
}

/// A skeleton handed out by the search, tied to the node it should credit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub skeleton: Vec<usize>,
    pub node: usize,
}

/// Skeleton search over operator sequences.
///
/// Without a goal every expanded node's path is a candidate skeleton. With a
/// goal a random rollout extends the path until the goal holds.
#[derive(Debug, Clone)]
pub struct Mcts<'a> {
    ops: &'a [Operator],
    goal: Option<Condition>,
    pub nodes: Vec<MctsNode>,
    pub c: f64,
    pub max_len: usize,
    revisit: bool,
    rng: ChaCha8Rng,
}

impl<'a> Mcts<'a> {
    pub fn new(root: SymbolicState, ops: &'a [Operator], max_len: usize, c: f64, seed: u64) -> Self {
        let mut m = Self { ops, goal: None, nodes: Vec::new(), c, max_len, revisit: false, rng: ChaCha8Rng::seed_from_u64(seed) };
        m.push_node(root, None, None);
        m
    }

    pub fn with_goal(mut self, goal: Condition) -> Self {
        self.goal = Some(goal);
        self
    }

    /// Once the tree is fully expanded, keep proposing leaves chosen by UCB1
    /// instead of stopping.
    pub fn revisiting(mut self) -> Self {
        self.revisit = true;
        self
    }

    fn push_node(&mut self, state: SymbolicState, parent: Option<usize>, op: Option<usize>) -> usize {
        let depth = parent.map_or(0, |p| self.nodes[p].depth + 1);
        let id = self.nodes.len();
        let untried = if depth < self.max_len { self.expandable(&state, parent) } else { Vec::new() };
        self.nodes.push(MctsNode { state, parent, op, children: Vec::new(), untried, visits: 0, total: 0.0, depth });
        id
    }

    /// Applicable operators whose successor changes the state and does not
    /// revisit a state on the path from the root.
    fn expandable(&self, state: &SymbolicState, parent: Option<usize>) -> Vec<usize> {
        applicable(state, self.ops)
            .into_iter()
            .filter(|&i| {
                let next = succ(state, &self.ops[i]).expect("applicable");
                next != *state && !self.on_path(parent, &next)
            })
            .collect()
    }

    fn on_path(&self, mut at: Option<usize>, s: &SymbolicState) -> bool {
        while let Some(i) = at {
            if self.nodes[i].state == *s {
                return true;
            }
            at = self.nodes[i].parent;
        }
        false
    }

    pub fn path(&self, mut node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        while let Some(op) = self.nodes[node].op {
            out.push(op);
            node = self.nodes[node].parent.expect("non-root node has a parent");
        }
        out.reverse();
        out
    }

    fn done(&self, node: usize) -> bool {
        let n = &self.nodes[node];
        n.untried.is_empty() && n.children.iter().all(|&c| self.done(c))
    }

    /// Whether the whole tree has been expanded.
    pub fn exhausted(&self) -> bool {
        self.done(0)
    }

    /// Descend by UCB1 to a node with untried operators, or to a leaf when
    /// `revisit` is set.
    fn select(&self, revisit: bool) -> usize {
        let mut at = 0;
        loop {
            let n = &self.nodes[at];
            if !n.untried.is_empty() || (revisit && n.children.is_empty()) {
                return at;
            }
            let mut best = None;
            let mut best_score = f64::NEG_INFINITY;
            for &ch in n.children.iter().filter(|&&c| revisit || !self.done(c)) {
                let c = &self.nodes[ch];
                let s = ucb1(c.total, c.visits, n.visits, self.c);
                if best.is_none() || s > best_score {
                    best_score = s;
                    best = Some(ch);
                }
            }
            at = best.expect("select is only called on an unfinished tree");
        }
    }

    /// Next skeleton to evaluate, or `None` once the tree is exhausted (and
    /// revisiting is off), the root has no successors, or no goal-reaching
    /// skeleton turned up within a bounded number of attempts.
    pub fn propose(&mut self) -> Option<Proposal> {
        for _ in 0..MAX_ATTEMPTS {
            let node = if self.exhausted() {
                if !self.revisit || self.nodes[0].children.is_empty() {
                    return None;
                }
                self.select(true)
            } else {
                let leaf = self.select(false);
                let op = self.nodes[leaf].untried.remove(0);
                let next = succ(&self.nodes[leaf].state, &self.ops[op]).expect("applicable");
                let child = self.push_node(next, Some(leaf), Some(op));
                self.nodes[leaf].children.push(child);
                child
            };
            let mut skeleton = self.path(node);
            if self.goal.is_some() && !self.complete(node, &mut skeleton) {
                self.backprop(node, 0.0);
                continue;
            }
            return Some(Proposal { skeleton, node });
        }
        None
    }

    /// Extend `skeleton` by uniformly random operators until the goal holds.
    fn complete(&mut self, node: usize, skeleton: &mut Vec<usize>) -> bool {
        let goal = self.goal.as_ref().expect("goal mode");
        let mut state = self.nodes[node].state.clone();
        let mut seen = vec![state.clone()];
        while !goal.holds(&state) && skeleton.len() < self.max_len {
            let opts: Vec<usize> = applicable(&state, self.ops)
                .into_iter()
                .filter(|&i| !seen.contains(&succ(&state, &self.ops[i]).expect("applicable")))
                .collect();
            if opts.is_empty() {
                break;
            }
            let pick = opts[self.rng.random_range(0..opts.len())];
            state = succ(&state, &self.ops[pick]).expect("applicable");
            seen.push(state.clone());
            skeleton.push(pick);
        }
        goal.holds(&state)
    }

    pub fn backprop(&mut self, node: usize, reward: f64) {
        let mut at = Some(node);
        while let Some(i) = at {
            self.nodes[i].visits += 1;
            self.nodes[i].total += reward;
            at = self.nodes[i].parent;
        }
    }
}

/// Every pruned skeleton of length `1..=max_len`, depth first in declaration order.
pub fn enumerate_skeletons(root: &SymbolicState, ops: &[Operator], max_len: usize) -> Result<Vec<Vec<usize>>> {
    fn walk(
        state: &SymbolicState,
        ops: &[Operator],
        max_len: usize,
        path: &mut Vec<usize>,
        seen: &mut Vec<SymbolicState>,
        out: &mut Vec<Vec<usize>>,
    ) -> Result<()> {
        if path.len() == max_len {
            return Ok(());
        }
        for i in applicable(state, ops) {
            let next = succ(state, &ops[i])?;
            if next == *state || seen.contains(&next) {
                continue;
            }
            path.push(i);
            out.push(path.clone());
            seen.push(next.clone());
            walk(&next, ops, max_len, path, seen, out)?;
            seen.pop();
            path.pop();
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, ops, max_len, &mut Vec::new(), &mut vec![root.clone()], &mut out)?;
    Ok(out)
}
