//! Ground symbolic layer: atoms, operators with switch constraints, MCTS.

mod mcts;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use mcts::{enumerate_skeletons, ucb1, Mcts, MctsNode, Proposal};

use crate::skills::{LongHorizonState, SkillKind};
use crate::{Error, Result};

/// A ground atom such as `(AtWall o)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl FromStr for Atom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let t = t.strip_prefix('(').and_then(|r| r.strip_suffix(')')).unwrap_or(t);
        let mut parts = t.split_whitespace();
        let predicate = parts
            .next()
            .ok_or_else(|| Error::Format(format!("empty atom '{s}'")))?
            .to_string();
        Ok(Self { predicate, args: parts.map(str::to_string).collect() })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Atom {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Closed-world set of true atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymbolicState(BTreeSet<Atom>);

impl SymbolicState {
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Self {
        Self(atoms.into_iter().collect())
    }

    pub fn parse(atoms: &[&str]) -> Result<Self> {
        atoms.iter().map(|a| a.parse()).collect::<Result<BTreeSet<_>>>().map(Self)
    }

    pub fn holds(&self, a: &Atom) -> bool {
        self.0.contains(a)
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sorted atoms, one per line.
    pub fn dump(&self) -> String {
        self.0.iter().map(|a| format!("{a}\n")).collect()
    }
}

/// Conjunction of positive and negated atoms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    #[serde(default)]
    pub pos: Vec<Atom>,
    #[serde(default)]
    pub neg: Vec<Atom>,
}

impl Condition {
    pub fn holds(&self, s: &SymbolicState) -> bool {
        self.pos.iter().all(|a| s.holds(a)) && !self.neg.iter().any(|a| s.holds(a))
    }
}

/// Restriction on one dim of an operator's subgoal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchConstraint {
    /// The dim takes one of a few values.
    Discrete { dim: usize, values: Vec<f64> },
    /// The dim stays within a sub-interval of its box.
    Interval { dim: usize, lower: f64, upper: f64 },
    Fixed { dim: usize, value: f64 },
    /// The dim equals another dim of the skill's start state plus an offset.
    Match {
        dim: usize,
        source: usize,
        #[serde(default)]
        offset: f64,
    },
}

impl SwitchConstraint {
    pub fn dim(&self) -> usize {
        match self {
            Self::Discrete { dim, .. } | Self::Interval { dim, .. } | Self::Fixed { dim, .. } | Self::Match { dim, .. } => {
                *dim
            }
        }
    }

    pub fn describe(&self) -> String {
        let name = LongHorizonState::dim_name(self.dim());
        match self {
            Self::Discrete { values, .. } => format!("{name} in {values:?}"),
            Self::Interval { lower, upper, .. } => format!("{name} in [{lower}, {upper}]"),
            Self::Fixed { value, .. } => format!("{name} = {value}"),
            Self::Match { source, offset, .. } => {
                format!("{name} = {} + {offset}", LongHorizonState::dim_name(*source))
            }
        }
    }

    /// Whether `goal[dim]` satisfies the constraint given the skill's start state.
    pub fn satisfied(&self, start: &[f64], goal: &[f64], tol: f64) -> bool {
        let v = goal[self.dim()];
        match self {
            Self::Discrete { values, .. } => values.iter().any(|w| (v - w).abs() <= tol),
            Self::Interval { lower, upper, .. } => v >= lower - tol && v <= upper + tol,
            Self::Fixed { value, .. } => (v - value).abs() <= tol,
            Self::Match { source, offset, .. } => (v - (start[*source] + offset)).abs() <= tol,
        }
    }
}

/// `dim` moves by the same amount as `source` while the skill runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Carry {
    pub dim: usize,
    pub source: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Operator {
    pub name: String,
    #[serde(default)]
    pub pre: Vec<Atom>,
    #[serde(default)]
    pub pre_not: Vec<Atom>,
    #[serde(default)]
    pub add: Vec<Atom>,
    #[serde(default)]
    pub del: Vec<Atom>,
    /// Long-horizon dims the operator may change.
    pub actuated: Vec<usize>,
    #[serde(default)]
    pub constraints: Vec<SwitchConstraint>,
    #[serde(default)]
    pub carry: Vec<Carry>,
}

impl Operator {
    pub fn skill(&self) -> Result<SkillKind> {
        SkillKind::of_operator(&self.name)
    }

    pub fn applicable(&self, s: &SymbolicState) -> bool {
        self.pre.iter().all(|a| s.holds(a)) && !self.pre_not.iter().any(|a| s.holds(a))
    }

    /// Constraint on `dim`, if any.
    pub fn constraint(&self, dim: usize) -> Option<&SwitchConstraint> {
        self.constraints.iter().find(|c| c.dim() == dim)
    }
}

/// Operators applicable in `state`, as indices in declaration order.
pub fn applicable(state: &SymbolicState, ops: &[Operator]) -> Vec<usize> {
    (0..ops.len()).filter(|&i| ops[i].applicable(state)).collect()
}

/// `(state \ del) + add`.
pub fn succ(state: &SymbolicState, op: &Operator) -> Result<SymbolicState> {
    if !op.applicable(state) {
        return Err(Error::Precondition(format!("operator '{}' is not applicable", op.name)));
    }
    let mut next = state.0.clone();
    for a in &op.del {
        next.remove(a);
    }
    next.extend(op.add.iter().cloned());
    Ok(SymbolicState(next))
}

/// Replay a skeleton from `state`, returning every intermediate state.
pub fn replay(state: &SymbolicState, ops: &[Operator], skeleton: &[usize]) -> Result<Vec<SymbolicState>> {
    let mut out = vec![state.clone()];
    for &i in skeleton {
        let op = ops.get(i).ok_or_else(|| Error::Precondition(format!("operator index {i} out of range")))?;
        let next = succ(out.last().expect("non-empty"), op)?;
        out.push(next);
    }
    Ok(out)
}

/// Symbolic domain file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicDomain {
    pub name: String,
    pub predicates: Vec<String>,
    /// Entity name to type.
    pub entities: BTreeMap<String, String>,
    /// Whether long-horizon states carry a tool pose.
    #[serde(default)]
    pub tool: bool,
    pub initial_state: SymbolicState,
    /// Only used by the goal-directed baseline.
    #[serde(default)]
    pub goal: Option<Condition>,
    pub operators: Vec<Operator>,
}

impl SymbolicDomain {
    pub fn validate(&self) -> Result<()> {
        let dims = if self.tool { 15 } else { 12 };
        let check_atom = |a: &Atom, ctx: &str| -> Result<()> {
            if !self.predicates.contains(&a.predicate) {
                return Err(Error::Config(format!("{ctx}: undeclared predicate in {a}")));
            }
            if let Some(e) = a.args.iter().find(|e| !self.entities.contains_key(*e)) {
                return Err(Error::Config(format!("{ctx}: unknown entity '{e}' in {a}")));
            }
            Ok(())
        };
        for a in self.initial_state.atoms() {
            check_atom(a, "initial state")?;
        }
        if let Some(g) = &self.goal {
            for a in g.pos.iter().chain(&g.neg) {
                check_atom(a, "goal")?;
            }
        }
        for (i, op) in self.operators.iter().enumerate() {
            let ctx = format!("operator '{}'", op.name);
            op.skill().map_err(|e| Error::Config(format!("{ctx}: {e}")))?;
            if self.operators[..i].iter().any(|o| o.name == op.name) {
                return Err(Error::Config(format!("{ctx}: declared twice")));
            }
            for a in op.pre.iter().chain(&op.pre_not).chain(&op.add).chain(&op.del) {
                check_atom(a, &ctx)?;
            }
            if let Some(a) = op.add.iter().find(|a| op.del.contains(a)) {
                return Err(Error::Config(format!("{ctx}: {a} is both added and deleted")));
            }
            if op.actuated.is_empty() {
                return Err(Error::Config(format!("{ctx}: no actuated dims")));
            }
            let dims_used = op
                .actuated
                .iter()
                .copied()
                .chain(op.constraints.iter().map(|c| c.dim()))
                .chain(op.carry.iter().flat_map(|c| [c.dim, c.source]));
            for d in dims_used {
                if d >= dims {
                    return Err(Error::Config(format!("{ctx}: dim {d} outside the {dims}-dim state")));
                }
            }
            for c in &op.constraints {
                if !op.actuated.contains(&c.dim()) {
                    return Err(Error::Config(format!("{ctx}: constraint on non-actuated {}", c.describe())));
                }
                match c {
                    SwitchConstraint::Discrete { values, .. } if values.is_empty() => {
                        return Err(Error::Config(format!("{ctx}: empty discrete set")));
                    }
                    SwitchConstraint::Interval { lower, upper, .. } if !(lower <= upper) => {
                        return Err(Error::Config(format!("{ctx}: empty interval on {}", c.describe())));
                    }
                    SwitchConstraint::Match { source, .. } if *source >= dims => {
                        return Err(Error::Config(format!("{ctx}: match source out of range")));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn operator(&self, name: &str) -> Result<usize> {
        self.operators
            .iter()
            .position(|o| o.name == name)
            .ok_or_else(|| Error::Config(format!("no operator named '{name}'")))
    }

    pub fn skeleton_names(&self, skeleton: &[usize]) -> Vec<String> {
        skeleton.iter().map(|&i| self.operators[i].name.clone()).collect()
    }

    pub fn skeleton_from_names<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.operator(n.as_ref())).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: Self = serde_json::from_str(text).map_err(|e| Error::Format(format!("domain: {e}")))?;
        d.validate()?;
        Ok(d)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Built-in domains: `npm`, `ppm`, `pm`.
    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name {
            "npm" => include_str!("../../data/npm.json"),
            "ppm" => include_str!("../../data/ppm.json"),
            "pm" => include_str!("../../data/pm.json"),
            _ => return Err(Error::Config(format!("no built-in domain '{name}'"))),
        };
        Self::from_json(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(s: &str) -> Atom {
        s.parse().unwrap()
    }

    #[test]
    fn atoms_parse_and_print() {
        let a = atom("(ReadyPull t o)");
        assert_eq!(a.predicate, "ReadyPull");
        assert_eq!(a.args, vec!["t", "o"]);
        assert_eq!(a.to_string(), "(ReadyPull t o)");
        assert_eq!(atom("AtWall o"), atom("(AtWall o)"));
        assert!("()".parse::<Atom>().is_err());
    }

    #[test]
    fn npm_applicable_at_start() {
        let d = SymbolicDomain::builtin("npm").unwrap();
        let names = d.skeleton_names(&applicable(&d.initial_state, &d.operators));
        assert_eq!(names, vec!["push_wall", "pull_wall"]);
        assert!(applicable(&SymbolicState::default(), &d.operators).is_empty());
        let wall = SymbolicState::parse(&["AtWall o"]).unwrap();
        assert!(d.operators[d.operator("pivot").unwrap()].applicable(&wall));
    }

    #[test]
    fn npm_successors() {
        let d = SymbolicDomain::builtin("npm").unwrap();
        let op = |n: &str| &d.operators[d.operator(n).unwrap()];
        let s1 = succ(&d.initial_state, op("push_wall")).unwrap();
        assert!(s1.holds(&atom("AtWall o")));
        let s2 = succ(&s1, op("pivot")).unwrap();
        assert!(s2.holds(&atom("AtWall o")) && s2.holds(&atom("AfterFlip o")));
        let s3 = succ(&s2, op("pull_center")).unwrap();
        assert!(!s3.holds(&atom("AtWall o")) && s3.holds(&atom("AfterFlip o")));
        assert!(matches!(succ(&s3, op("pivot")), Err(Error::Precondition(_))));
        assert_eq!(s3.dump(), "(AfterFlip o)\n(onTable o)\n");
    }

    #[test]
    fn builtin_domains_validate() {
        for name in ["npm", "ppm", "pm"] {
            let d = SymbolicDomain::builtin(name).unwrap();
            let text = serde_json::to_string(&d).unwrap();
            assert_eq!(SymbolicDomain::from_json(&text).unwrap(), d);
        }
        assert!(SymbolicDomain::builtin("xyz").is_err());
    }

    #[test]
    fn validation_rejects_bad_operators() {
        let mut d = SymbolicDomain::builtin("npm").unwrap();
        d.operators[0].add.push(atom("Flying o"));
        assert!(d.validate().is_err());
        let mut d = SymbolicDomain::builtin("npm").unwrap();
        let a = d.operators[0].add[0].clone();
        d.operators[0].del.push(a);
        assert!(d.validate().is_err());
        let mut d = SymbolicDomain::builtin("npm").unwrap();
        d.operators[0].actuated.clear();
        assert!(d.validate().is_err());
    }

    #[test]
    fn constraint_checks() {
        let start = vec![0.0; 12];
        let mut goal = vec![0.0; 12];
        goal[5] = std::f64::consts::FRAC_PI_2;
        let c = SwitchConstraint::Discrete { dim: 5, values: vec![0.0, std::f64::consts::FRAC_PI_2] };
        assert!(c.satisfied(&start, &goal, 1e-9));
        goal[5] = 1.0;
        assert!(!c.satisfied(&start, &goal, 1e-9));
        let m = SwitchConstraint::Match { dim: 6, source: 0, offset: 0.1 };
        goal[6] = 0.1;
        assert!(m.satisfied(&start, &goal, 1e-12));
        assert_eq!(m.describe(), "effector.x = object.x + 0.1");
    }
}
