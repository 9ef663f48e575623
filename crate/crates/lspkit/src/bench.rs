//! Baselines and the benchmark harness.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cem::{cem_optimize, CemConfig, Sample, VariableSpec};
use crate::lsp::{build_objective, lsp_solve, verify_solution, LspConfig, Problem, Solution};
use crate::skills::LongHorizonState;
use crate::symbolic::{enumerate_skeletons, replay, Mcts, SymbolicDomain};
use crate::tt::{cross_indexed, tt_argmax, CrossConfig, Grid, DEFAULT_CANDIDATES};
use crate::value::SkillLibrary;
use crate::{par, Error, Result};

fn uniform_sample(spec: &VariableSpec, rng: &mut impl Rng) -> Sample {
    let x = spec.lower.iter().zip(&spec.upper).map(|(&l, &u)| if l < u { rng.random_range(l..=u) } else { l }).collect();
    let k = spec.categories.iter().map(|c| rng.random_range(0..c.len())).collect();
    Sample { x, k }
}

fn best_of<F: Fn(&Sample) -> f64 + Sync>(objective: F, samples: Vec<Sample>) -> (Sample, f64) {
    let scores = par::map(&samples, |s| objective(s));
    let mut best = 0;
    for (i, v) in scores.iter().enumerate() {
        if *v > scores[best] {
            best = i;
        }
    }
    let v = scores[best];
    (samples.into_iter().nth(best).expect("non-empty"), v)
}

/// Best of `n` uniform samples.
pub fn random_shooting<F>(objective: F, spec: &VariableSpec, n: usize, seed: u64) -> Result<(Sample, f64)>
where
    F: Fn(&Sample) -> f64 + Sync,
{
    spec.validate()?;
    if n == 0 {
        return Err(Error::Config("random shooting needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n).map(|_| uniform_sample(spec, &mut rng)).collect();
    Ok(best_of(objective, samples))
}

/// Random shooting over a discrete-only spec without repeating a combination.
pub fn random_shooting_distinct<F>(objective: F, spec: &VariableSpec, n: usize, seed: u64) -> Result<(Sample, f64)>
where
    F: Fn(&Sample) -> f64 + Sync,
{
    spec.validate()?;
    if spec.continuous_dim() != 0 {
        return Err(Error::Config("sampling without replacement needs a discrete-only spec".into()));
    }
    if n == 0 {
        return Err(Error::Config("random shooting needs at least one sample".into()));
    }
    let total: usize = spec.categories.iter().map(|c| c.len()).product();
    let mut all: Vec<usize> = (0..total).collect();
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let samples = all
        .into_iter()
        .take(n)
        .map(|mut flat| {
            let mut k = vec![0; spec.discrete_dim()];
            for d in (0..k.len()).rev() {
                let c = spec.categories[d].len();
                k[d] = flat % c;
                flat /= c;
            }
            Sample { x: vec![], k }
        })
        .collect();
    Ok(best_of(objective, samples))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TtgoConfig {
    /// Grid nodes per continuous dim.
    pub resolution: usize,
    pub eps: f64,
    pub max_rank: usize,
    pub seed: u64,
}

impl Default for TtgoConfig {
    fn default() -> Self {
        Self { resolution: 64, eps: 1e-3, max_rank: 30, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtgoResult {
    pub best: Sample,
    pub score: f64,
    pub approx_time: f64,
    pub infer_time: f64,
    pub evaluations: usize,
}

/// TT-cross on the objective over a grid of the spec, then argmax of the train.
pub fn ttgo_optimize<F>(objective: F, spec: &VariableSpec, cfg: &TtgoConfig) -> Result<TtgoResult>
where
    F: Fn(&Sample) -> f64 + Sync,
{
    spec.validate()?;
    if cfg.resolution < 2 {
        return Err(Error::Config("TTGO resolution must be at least 2".into()));
    }
    // Degenerate dims get a dummy two-node axis; both nodes map to the same value.
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut counts = Vec::new();
    for (&l, &u) in spec.lower.iter().zip(&spec.upper) {
        lower.push(l);
        upper.push(if u > l { u } else { l + 1.0 });
        counts.push(if u > l { cfg.resolution } else { 2 });
    }
    for c in &spec.categories {
        lower.push(0.0);
        upper.push(c.len().max(2) as f64 - 1.0);
        counts.push(c.len().max(2));
    }
    if spec.is_empty() {
        let best = Sample { x: vec![], k: vec![] };
        let score = objective(&best);
        return Ok(TtgoResult { best, score, approx_time: 0.0, infer_time: 0.0, evaluations: 1 });
    }
    let grid = Grid::new(lower, upper, counts)?;
    let nc = spec.continuous_dim();
    let to_sample = |idx: &[usize]| Sample {
        x: (0..nc).map(|k| grid.coord(k, idx[k]).min(spec.upper[k])).collect(),
        k: spec.categories.iter().enumerate().map(|(j, c)| idx[nc + j].min(c.len() - 1)).collect(),
    };
    let t = Instant::now();
    let cross = CrossConfig { seed: cfg.seed, ..CrossConfig::new(cfg.eps, cfg.max_rank) };
    let out = cross_indexed(|idx: &[usize]| objective(&to_sample(idx)), &grid, &cross, None)?;
    let approx_time = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let (idx, _) = tt_argmax(&out.tt, DEFAULT_CANDIDATES)?;
    let infer_time = t.elapsed().as_secs_f64();
    let best = to_sample(&idx);
    let score = objective(&best);
    Ok(TtgoResult { best, score, approx_time, infer_time, evaluations: out.report.evaluations + 1 })
}

/// Goal-directed baseline: MCTS with the domain's symbolic goal, then CEM on
/// target distance alone, accepting the first subgoals that execute.
pub fn stap_baseline(problem: &Problem, lib: &SkillLibrary, cfg: &LspConfig) -> Result<Option<Solution>> {
    cfg.validate()?;
    let goal = problem
        .domain
        .goal
        .clone()
        .ok_or_else(|| Error::Config(format!("domain '{}' declares no symbolic goal", problem.domain.name)))?;
    let ops = &problem.domain.operators;
    let mut tree = Mcts::new(problem.symbolic.clone(), ops, cfg.max_len, cfg.explore, cfg.seed).with_goal(goal).revisiting();
    for it in 0..cfg.iterations {
        let Some(prop) = tree.propose() else { break };
        let obj = build_objective(problem, lib, &prop.skeleton)?;
        let res = cem_optimize(|s| obj.feasibility(s), &obj.spec, &cfg.cem_for(it))?;
        let subgoals = obj.decode(&res.best);
        let check = verify_solution(problem, lib, &prop.skeleton, &subgoals)?;
        tree.backprop(prop.node, check.reward);
        if check.solved {
            return Ok(Some(Solution::from_subgoals(&obj, subgoals, &check)));
        }
    }
    Ok(None)
}

/// Shortest skeleton from the domain's initial state that satisfies its symbolic goal.
pub fn canonical_skeleton(domain: &SymbolicDomain, max_len: usize) -> Result<Vec<usize>> {
    let goal = domain.goal.as_ref().ok_or_else(|| Error::Config(format!("domain '{}' declares no symbolic goal", domain.name)))?;
    let mut all = enumerate_skeletons(&domain.initial_state, &domain.operators, max_len)?;
    all.sort_by_key(|s| s.len());
    for s in all {
        let states = replay(&domain.initial_state, &domain.operators, &s)?;
        if goal.holds(states.last().expect("non-empty")) {
            return Ok(s);
        }
    }
    Err(Error::Config(format!("no skeleton of length <= {max_len} reaches the goal of '{}'", domain.name)))
}

/// Seeded random instance of a built-in domain.
pub fn random_instance(domain: &str, seed: u64) -> Result<Problem> {
    use std::f64::consts::FRAC_PI_2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..=hi);
    let ee = [0.0, 0.0, 0.2, 0.0, 0.0, 0.0];
    let (initial, target) = match domain {
        "npm" => {
            let mut x0 = vec![u(-0.2, 0.2), u(-0.05, 0.15), 0.0, 0.0, 0.0, u(-0.5, 0.5)];
            let mut xt = vec![u(-0.2, 0.2), u(-0.1, 0.2), 0.0, FRAC_PI_2, 0.0, u(-0.5, 0.5)];
            x0.extend(ee);
            xt.extend(ee);
            (x0, xt)
        }
        "ppm" => {
            let mut x0 = vec![u(0.0, 0.2), u(-0.2, 0.2), 0.0, 0.0, 0.0, u(-0.5, 0.5)];
            x0.extend(ee);
            let obj = [0.4, u(-0.2, 0.2), 0.0, 0.0, 0.0, 0.0];
            let mut xt = obj.to_vec();
            xt.extend(obj);
            (x0, xt)
        }
        "pm" => {
            let mut x0 = vec![u(0.25, 0.35), u(-0.05, 0.05), 0.0, 0.0, 0.0, 0.0];
            x0.extend(ee);
            x0.extend([0.1, 0.25, 0.0]);
            let obj = [u(0.0, 0.15), u(-0.15, 0.0), 0.0, 0.0, 0.0, u(-0.5, 0.5)];
            let mut xt = obj.to_vec();
            xt.extend(obj);
            xt.extend([-0.2, 0.3, 0.0]);
            (x0, xt)
        }
        _ => return Err(Error::Config(format!("no instance generator for domain '{domain}'"))),
    };
    Problem::new(SymbolicDomain::builtin(domain)?, initial, target)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// CEM-MD on the composed objective of a fixed skeleton.
    Cem,
    Shooting,
    Ttgo,
    /// Full planner.
    Lsp,
    /// Goal-directed baseline.
    Stap,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Cem => "cem",
            Self::Shooting => "shooting",
            Self::Ttgo => "ttgo",
            Self::Lsp => "lsp",
            Self::Stap => "stap",
        }
    }

    fn plans(self) -> bool {
        matches!(self, Self::Lsp | Self::Stap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Suite {
    pub name: String,
    pub domains: Vec<String>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Skeleton for the optimizer methods; defaults to the shortest goal-reaching one.
    pub skeleton: Option<Vec<String>>,
    pub shooting_samples: usize,
    pub cem: CemConfig,
    pub ttgo: TtgoConfig,
    pub lsp: LspConfig,
}

impl Default for Suite {
    fn default() -> Self {
        Self {
            name: "suite".into(),
            domains: Vec::new(),
            methods: Vec::new(),
            seeds: Vec::new(),
            skeleton: None,
            shooting_samples: 20_000,
            cem: CemConfig::default(),
            ttgo: TtgoConfig::default(),
            lsp: LspConfig::default(),
        }
    }
}

impl Suite {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub domain: String,
    pub seed: u64,
    pub method: Method,
    /// Distance of the final configuration from the target: planned for the
    /// optimizers, executed for the planners.
    pub error: f64,
    pub score: f64,
    pub normalized_reward: f64,
    pub length: usize,
    pub solved: bool,
    /// Objective evaluations.
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub domain: String,
    pub seed: u64,
    pub method: Method,
    pub total: f64,
    /// TTGO only.
    pub approx: Option<f64>,
    pub infer: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

impl Stat {
    pub fn of(v: &[f64]) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let m = s.len() / 2;
        let median = if s.len() % 2 == 1 { s[m] } else { 0.5 * (s[m - 1] + s[m]) };
        Some(Self { mean, std, median })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub domain: String,
    pub method: Method,
    pub count: usize,
    pub solved: usize,
    pub error: Stat,
    /// Over solved records only.
    pub normalized_reward: Option<Stat>,
    pub length: Stat,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub suite: String,
    pub records: Vec<Record>,
    pub aggregates: Vec<Aggregate>,
    #[serde(skip)]
    pub timings: Vec<Timing>,
}

impl BenchReport {
    pub fn aggregate(records: &[Record]) -> Vec<Aggregate> {
        let mut groups: BTreeMap<(String, Method), Vec<&Record>> = BTreeMap::new();
        for r in records {
            groups.entry((r.domain.clone(), r.method)).or_default().push(r);
        }
        groups
            .into_iter()
            .map(|((domain, method), rs)| {
                let solved: Vec<&&Record> = rs.iter().filter(|r| r.solved).collect();
                Aggregate {
                    domain,
                    method,
                    count: rs.len(),
                    solved: solved.len(),
                    error: Stat::of(&rs.iter().map(|r| r.error).collect::<Vec<_>>()).expect("non-empty group"),
                    normalized_reward: Stat::of(&solved.iter().map(|r| r.normalized_reward).collect::<Vec<_>>()),
                    length: Stat::of(&rs.iter().map(|r| r.length as f64).collect::<Vec<_>>()).expect("non-empty group"),
                }
            })
            .collect()
    }

    pub fn records_csv(&self) -> String {
        let mut out = String::from("domain,seed,method,error,score,normalized_reward,length,solved,evaluations\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.domain,
                r.seed,
                r.method.name(),
                r.error,
                r.score,
                r.normalized_reward,
                r.length,
                r.solved,
                r.evaluations
            );
        }
        out
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("domain,seed,method,total,approx,infer\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for t in &self.timings {
            let _ = writeln!(out, "{},{},{},{},{},{}", t.domain, t.seed, t.method.name(), t.total, opt(t.approx), opt(t.infer));
        }
        out
    }

    /// `records.csv`, `summary.json` and `timings.csv` in `dir`. Only the
    /// timings differ between identical runs.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("records.csv"), self.records_csv())?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(self)? + "\n")?;
        std::fs::write(dir.join("timings.csv"), self.timings_csv())?;
        Ok(())
    }
}

fn run_instance(suite: &Suite, lib: &SkillLibrary, domain: &str, seed: u64) -> Result<Vec<(Record, Timing)>> {
    let problem = random_instance(domain, seed)?;
    let skeleton = match &suite.skeleton {
        Some(names) => problem.domain.skeleton_from_names(names)?,
        None => canonical_skeleton(&problem.domain, suite.lsp.max_len)?,
    };
    let mut out = Vec::new();
    for &method in &suite.methods {
        let t = Instant::now();
        let (mut approx, mut infer) = (None, None);
        let record = if method.plans() {
            let cfg = LspConfig { seed, ..suite.lsp.clone() };
            let sol = match method {
                Method::Lsp => lsp_solve(&problem, lib, &cfg)?.best().cloned(),
                _ => stap_baseline(&problem, lib, &cfg)?,
            };
            match sol {
                Some(s) => {
                    let idx = problem.domain.skeleton_from_names(&s.skeleton)?;
                    let check = verify_solution(&problem, lib, &idx, &s.subgoals)?;
                    Record {
                        domain: domain.into(),
                        seed,
                        method,
                        error: LongHorizonState::distance(&check.achieved, &problem.target),
                        score: s.score,
                        normalized_reward: s.normalized_reward,
                        length: s.skeleton.len(),
                        solved: check.solved,
                        evaluations: 0,
                    }
                }
                None => Record {
                    domain: domain.into(),
                    seed,
                    method,
                    error: LongHorizonState::distance(&problem.initial, &problem.target),
                    score: f64::NEG_INFINITY,
                    normalized_reward: 0.0,
                    length: 0,
                    solved: false,
                    evaluations: 0,
                },
            }
        } else {
            let obj = build_objective(&problem, lib, &skeleton)?;
            let f = |s: &Sample| obj.evaluate(s);
            let (best, evals) = match method {
                Method::Cem => {
                    let r = cem_optimize(f, &obj.spec, &CemConfig { seed, ..suite.cem.clone() })?;
                    (r.best, r.evaluations)
                }
                Method::Shooting => (random_shooting(f, &obj.spec, suite.shooting_samples, seed)?.0, suite.shooting_samples),
                _ => {
                    let r = ttgo_optimize(f, &obj.spec, &TtgoConfig { seed, ..suite.ttgo.clone() })?;
                    approx = Some(r.approx_time);
                    infer = Some(r.infer_time);
                    (r.best, r.evaluations)
                }
            };
            let subgoals = obj.decode(&best);
            let last = subgoals.last().unwrap_or(&problem.initial);
            let rewards = obj.normalized_rewards(&subgoals);
            Record {
                domain: domain.into(),
                seed,
                method,
                error: LongHorizonState::distance(last, &problem.target),
                score: obj.score(&subgoals),
                normalized_reward: rewards.iter().sum(),
                length: skeleton.len(),
                solved: problem.meets_target(last),
                evaluations: evals,
            }
        };
        let timing = Timing { domain: domain.into(), seed, method, total: t.elapsed().as_secs_f64(), approx, infer };
        out.push((record, timing));
    }
    Ok(out)
}

/// Run every (domain, seed) instance with every method of the suite.
pub fn run_benchmarks(suite: &Suite, lib: &SkillLibrary) -> Result<BenchReport> {
    for d in &suite.domains {
        let domain = SymbolicDomain::builtin(d)?;
        lib.require(domain.operators.iter().map(|o| o.skill()).collect::<Result<Vec<_>>>()?)?;
    }
    let jobs: Vec<(String, u64)> = suite.domains.iter().flat_map(|d| suite.seeds.iter().map(move |&s| (d.clone(), s))).collect();
    let results = par::map(&jobs, |(d, s)| run_instance(suite, lib, d, *s));
    let mut report = BenchReport { suite: suite.name.clone(), ..Default::default() };
    for r in results {
        for (rec, t) in r? {
            report.records.push(rec);
            report.timings.push(t);
        }
    }
    report.aggregates = BenchReport::aggregate(&report.records);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_shot_returns_that_sample() {
        let spec = VariableSpec::new(vec![-1.0], vec![1.0], vec![]).unwrap();
        let (s, v) = random_shooting(|s| s.x[0], &spec, 1, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(s, uniform_sample(&spec, &mut rng));
        assert_eq!(v, s.x[0]);
    }

    #[test]
    fn distinct_shooting_is_exhaustive() {
        let spec = VariableSpec::new(vec![], vec![], vec![vec![0.0; 3], vec![0.0; 4]]).unwrap();
        let f = |s: &Sample| -((s.k[0] as f64 - 2.0).powi(2) + (s.k[1] as f64 - 1.0).powi(2));
        let (s, v) = random_shooting_distinct(f, &spec, 12, 9).unwrap();
        assert_eq!(s.k, vec![2, 1]);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn ttgo_finds_quadratic_optimum_within_a_cell() {
        let spec = VariableSpec::new(vec![-1.0; 3], vec![1.0; 3], vec![]).unwrap();
        let c = [0.3, -0.55, 0.1];
        let f = |s: &Sample| -(0..3).map(|k| (s.x[k] - c[k]).powi(2)).sum::<f64>();
        let r = ttgo_optimize(f, &spec, &TtgoConfig::default()).unwrap();
        let cell = 2.0 / 63.0;
        for k in 0..3 {
            assert!((r.best.x[k] - c[k]).abs() <= cell, "{:?}", r.best);
        }
    }

    #[test]
    fn ttgo_on_a_constant() {
        let spec = VariableSpec::new(vec![0.0; 2], vec![1.0; 2], vec![vec![1.0, 2.0]]).unwrap();
        let r = ttgo_optimize(|_| 4.5, &spec, &TtgoConfig::default()).unwrap();
        assert_eq!(r.score, 4.5);
    }

    #[test]
    fn stats_and_aggregates() {
        assert_eq!(Stat::of(&[]), None);
        let s = Stat::of(&[1.0, 3.0, 2.0, 6.0]).unwrap();
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.median, 2.5);
        assert!((s.std - 3.5f64.sqrt()).abs() < 1e-15);
        let rec = |m, e, ok| Record {
            domain: "npm".into(),
            seed: 0,
            method: m,
            error: e,
            score: 0.0,
            normalized_reward: 1.0,
            length: 3,
            solved: ok,
            evaluations: 1,
        };
        let aggs = BenchReport::aggregate(&[rec(Method::Cem, 0.1, true), rec(Method::Shooting, 0.4, false), rec(Method::Cem, 0.3, false)]);
        assert_eq!(aggs.len(), 2);
        assert_eq!(aggs[0].method, Method::Cem);
        assert_eq!((aggs[0].count, aggs[0].solved), (2, 1));
        assert!((aggs[0].error.mean - 0.2).abs() < 1e-15);
    }

    #[test]
    fn empty_suite_gives_empty_report() {
        let lib = SkillLibrary::new(crate::skills::DomainParams::default());
        let r = run_benchmarks(&Suite::default(), &lib).unwrap();
        assert!(r.records.is_empty() && r.aggregates.is_empty());
        assert_eq!(r.records_csv().lines().count(), 1);
    }

    #[test]
    fn canonical_skeletons() {
        let d = SymbolicDomain::builtin("npm").unwrap();
        assert_eq!(d.skeleton_names(&canonical_skeleton(&d, 5).unwrap()), vec!["push_wall", "pivot", "pull_center"]);
        let d = SymbolicDomain::builtin("pm").unwrap();
        assert_eq!(canonical_skeleton(&d, 5).unwrap().len(), 5);
    }

    #[test]
    fn instances_are_valid_and_seeded() {
        for d in ["npm", "ppm", "pm"] {
            let a = random_instance(d, 3).unwrap();
            assert_eq!(a, random_instance(d, 3).unwrap());
            LongHorizonState::check(&a.initial, 0.5).unwrap();
            LongHorizonState::check(&a.target, 0.5).unwrap();
        }
        assert!(random_instance("xyz", 0).is_err());
    }
}
