use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use lspkit::bench::{run_benchmarks, Suite};
use lspkit::lsp::{lsp_solve, verify_solution, LspConfig, Problem, Solution, SolutionSet, Verification};
use lspkit::skills::{DomainParams, SkillKind, SkillParams};
use lspkit::value::{bellman_residual, sample_state, Skill, SkillLibrary};
use lspkit::{par, Error};

const RESIDUAL_STATES: usize = 1000;

#[derive(Parser, Debug)]
#[command(name = "lspkit", version, about = "Train skills, plan skill sequences, verify and benchmark plans")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
    #[command(flatten)]
    opts: Overrides,
    /// Debug logging (RUST_LOG still wins).
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train value functions for one skill or `all`.
    Train {
        skill: String,
        /// Skill parameter file; built-in defaults otherwise.
        #[arg(long)]
        domain: Option<PathBuf>,
        #[arg(long)]
        library: PathBuf,
    },
    /// Plan for a problem file and write the solution set.
    Plan {
        #[arg(long)]
        problem: PathBuf,
        /// Overrides the problem's library.
        #[arg(long)]
        library: Option<PathBuf>,
        /// Planner settings (JSON); flags win over it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "solutions.json")]
        out: PathBuf,
    },
    /// Replay a plan output or a single solution against a problem.
    Verify {
        solution: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        library: Option<PathBuf>,
    },
    /// Run a benchmark suite.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        library: PathBuf,
        #[arg(long, default_value = "bench_out")]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Default, Clone, Serialize)]
struct Overrides {
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TT-cross accuracy (training and TTGO).
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    max_rank: Option<usize>,
    /// CEM population.
    #[arg(long, global = true)]
    pop: Option<usize>,
    /// CEM elite fraction.
    #[arg(long, global = true)]
    elite: Option<f64>,
    /// Planner iterations, or value iterations when training.
    #[arg(long, global = true)]
    iters: Option<usize>,
    #[arg(long, global = true)]
    max_solutions: Option<usize>,
    /// MCTS exploration constant.
    #[arg(long, global = true)]
    explore: Option<f64>,
}

impl Overrides {
    fn check(&self) -> anyhow::Result<()> {
        if let Some(e) = self.eps {
            if !(e > 0.0) {
                return Err(Error::Config(format!("--eps must be positive, got {e}")).into());
            }
        }
        if let Some(e) = self.elite {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::Config(format!("--elite must lie in (0, 1), got {e}")).into());
            }
        }
        if let Some(c) = self.explore {
            if !(c >= 0.0) {
                return Err(Error::Config(format!("--explore must be non-negative, got {c}")).into());
            }
        }
        for (name, v) in [("--max-rank", self.max_rank), ("--pop", self.pop), ("--iters", self.iters), ("--max-solutions", self.max_solutions)] {
            if v == Some(0) {
                return Err(Error::Config(format!("{name} must be positive")).into());
            }
        }
        Ok(())
    }

    fn apply_skill(&self, sp: &mut SkillParams) {
        if let Some(e) = self.eps {
            sp.eps = e;
        }
        if let Some(r) = self.max_rank {
            sp.max_rank = r;
        }
        if let Some(i) = self.iters {
            sp.max_iters = i;
        }
    }

    fn apply_lsp(&self, cfg: &mut LspConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = self.pop {
            cfg.cem.population = p;
        }
        if let Some(e) = self.elite {
            cfg.cem.elite_frac = e;
        }
        if let Some(i) = self.iters {
            cfg.iterations = i;
        }
        if let Some(n) = self.max_solutions {
            cfg.max_solutions = n;
        }
        if let Some(c) = self.explore {
            cfg.explore = c;
        }
    }

    fn apply_suite(&self, suite: &mut Suite) {
        if let Some(s) = self.seed {
            suite.seeds = vec![s];
        }
        self.apply_lsp(&mut suite.lsp);
        if let Some(p) = self.pop {
            suite.cem.population = p;
        }
        if let Some(e) = self.elite {
            suite.cem.elite_frac = e;
        }
        if let Some(e) = self.eps {
            suite.ttgo.eps = e;
        }
        if let Some(r) = self.max_rank {
            suite.ttgo.max_rank = r;
        }
    }
}

/// Written next to trained value functions.
#[derive(Debug, Serialize)]
struct TrainReport<'a> {
    seed: u64,
    params: &'a DomainParams,
    skills: Vec<SkillTrainReport>,
}

#[derive(Debug, Serialize)]
struct SkillTrainReport {
    skill: SkillKind,
    iterations: usize,
    converged: bool,
    change: f64,
    residual: f64,
    ranks: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanOutput {
    problem: String,
    library: String,
    config: LspConfig,
    result: SolutionSet,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SolutionFile {
    Plan(PlanOutput),
    Single(Solution),
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())).into())
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n").with_context(|| format!("writing {}", path.display()))
}

/// A missing directory loads as an empty library so that the caller's
/// skill check can name what is absent.
fn open_library(dir: &Path) -> anyhow::Result<SkillLibrary> {
    if !dir.exists() {
        log::warn!("library {} does not exist", dir.display());
        return Ok(SkillLibrary::new(DomainParams::default()));
    }
    Ok(SkillLibrary::load(dir)?)
}

fn cmd_train(skill: &str, domain: Option<&Path>, dir: &Path, o: &Overrides) -> anyhow::Result<ExitCode> {
    let mut params = match domain {
        Some(p) => DomainParams::load(p)?,
        None => DomainParams::default(),
    };
    let kinds: Vec<SkillKind> = if skill == "all" {
        params.skills.keys().copied().collect()
    } else {
        vec![skill.parse()?]
    };
    for k in &kinds {
        let sp = params.skills.get_mut(k).ok_or_else(|| Error::Config(format!("skill '{k}' missing from domain parameters")))?;
        o.apply_skill(sp);
    }
    params.validate()?;
    let seed = o.seed.unwrap_or(0);

    let mut lib = if dir.join("skills.json").exists() {
        let old = SkillLibrary::load(dir)?;
        if old.params != params {
            bail!(Error::Config(format!("{} holds skills trained with other parameters; use a fresh directory", dir.display())));
        }
        old
    } else {
        SkillLibrary::new(params.clone())
    };
    println!("config: {}", serde_json::to_string(&serde_json::json!({ "seed": seed, "skills": kinds }))?);

    let mut reports = Vec::new();
    for &k in &kinds {
        let t = Instant::now();
        let skill = Skill::train(k, &params, seed)?;
        let secs = t.elapsed().as_secs_f64();
        let cands = skill.mdp.candidates(&skill.params.train_candidates)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states: Vec<Vec<f64>> = (0..RESIDUAL_STATES).map(|_| sample_state(&skill.mdp, &mut rng)).collect();
        let residual = bellman_residual(&skill.mdp, &skill.vf, &cands, &states);
        let m = &skill.vf.meta;
        println!(
            "{k}: {} iterations, residual {residual:.3e}, ranks {:?}, {}, {secs:.1} s",
            m.iterations,
            m.ranks,
            if m.converged { "converged" } else { "NOT converged" }
        );
        reports.push(SkillTrainReport {
            skill: k,
            iterations: m.iterations,
            converged: m.converged,
            change: m.change,
            residual,
            ranks: m.ranks.clone(),
        });
        lib.insert(skill);
        lib.save(dir)?;
    }
    let stalled: Vec<String> = reports.iter().filter(|r| !r.converged).map(|r| format!("{} (change {:.3e})", r.skill, r.change)).collect();
    write_json(&dir.join("train.json"), &TrainReport { seed, params: &params, skills: reports })?;
    if !stalled.is_empty() {
        eprintln!("stopped before convergence: {}; value functions were still written", stalled.join(", "));
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn problem_and_library(problem: &Path, library: Option<&Path>) -> anyhow::Result<(Problem, PathBuf)> {
    let (p, named) = Problem::load(problem)?;
    let dir = library
        .map(Path::to_path_buf)
        .or(named)
        .ok_or_else(|| Error::Config("no library given: pass --library or set it in the problem file".into()))?;
    Ok((p, dir))
}

fn cmd_plan(problem: &Path, library: Option<&Path>, config: Option<&Path>, out: &Path, o: &Overrides) -> anyhow::Result<ExitCode> {
    let (p, dir) = problem_and_library(problem, library)?;
    let mut cfg: LspConfig = match config {
        Some(c) => read_json(c)?,
        None => LspConfig::default(),
    };
    o.apply_lsp(&mut cfg);
    cfg.validate()?;
    println!("config: {}", serde_json::to_string(&cfg)?);
    let lib = open_library(&dir)?;
    let t = Instant::now();
    let set = lsp_solve(&p, &lib, &cfg)?;
    println!("{} iterations, {} solutions, {:.1} s", set.iterations, set.solutions.len(), t.elapsed().as_secs_f64());
    for s in &set.solutions {
        println!("  {:<50} J {:>10.4}  normalized {:.3}", display_skeleton(&s.skeleton), s.score, s.normalized_reward);
    }
    let d = &set.diagnostics;
    if set.solutions.is_empty() {
        match d.best_infeasible {
            Some(j) => println!("no solution; best infeasible J {j:.4} for {}", display_skeleton(&d.best_infeasible_skeleton)),
            None => println!("no solution; no skeleton was evaluated"),
        }
    }
    let solved = !set.solutions.is_empty();
    let output = PlanOutput {
        problem: problem.display().to_string(),
        library: dir.display().to_string(),
        config: cfg,
        result: set,
    };
    write_json(out, &output)?;
    Ok(if solved { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn display_skeleton(s: &[String]) -> String {
    if s.is_empty() {
        "(empty)".into()
    } else {
        s.join(" -> ")
    }
}

fn print_verification(s: &Solution, v: &Verification) {
    println!("{}: {}", display_skeleton(&s.skeleton), if v.solved { "solved" } else { "NOT solved" });
    for r in &v.skills {
        println!(
            "  {:<16} steps {:>4}  success {:<5}  subgoal error {:.4} m / {:.4} rad",
            r.operator, r.steps, r.success, r.position_error, r.orientation_error
        );
    }
    for msg in &v.violations {
        println!("  violation: {msg}");
    }
    println!("  final error {:.4} m / {:.4} rad", v.position_error, v.orientation_error);
}

fn cmd_verify(solution: &Path, problem: &Path, library: Option<&Path>) -> anyhow::Result<ExitCode> {
    let solutions = match read_json::<SolutionFile>(solution)? {
        SolutionFile::Plan(p) => p.result.solutions,
        SolutionFile::Single(s) => vec![s],
    };
    let (p, dir) = problem_and_library(problem, library)?;
    let lib = open_library(&dir)?;
    if solutions.is_empty() {
        println!("{} holds no solutions", solution.display());
        return Ok(ExitCode::from(1));
    }
    let mut all = true;
    for s in &solutions {
        let v = match p.domain.skeleton_from_names(&s.skeleton) {
            Ok(idx) => verify_solution(&p, &lib, &idx, &s.subgoals)?,
            Err(e) => {
                println!("{}: NOT solved\n  violation: {e}", display_skeleton(&s.skeleton));
                all = false;
                continue;
            }
        };
        print_verification(s, &v);
        all &= v.solved;
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_bench(suite: &Path, library: &Path, out: &Path, o: &Overrides) -> anyhow::Result<ExitCode> {
    let mut s = Suite::load(suite)?;
    o.apply_suite(&mut s);
    s.cem.validate()?;
    s.lsp.validate()?;
    println!("config: {}", serde_json::to_string(&s)?);
    let lib = open_library(library)?;
    let t = Instant::now();
    let report = run_benchmarks(&s, &lib)?;
    report.write(out)?;
    write_json(&out.join("suite.json"), &s)?;
    println!("{} records in {:.1} s -> {}", report.records.len(), t.elapsed().as_secs_f64(), out.display());
    for a in &report.aggregates {
        println!(
            "  {:<4} {:<9} solved {:>3}/{:<3} error median {:.4} mean {:.4} +- {:.4}",
            a.domain,
            a.method.name(),
            a.solved,
            a.count,
            a.error.median,
            a.error.mean,
            a.error.std
        );
    }
    Ok(ExitCode::SUCCESS)
}

/// 2 for bad input or configuration, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(le) = cause.downcast_ref::<Error>() {
            return match le {
                Error::Config(_) | Error::Format(_) | Error::Json(_) | Error::Io(_) => 2,
                _ => 1,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    1
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("LSPKIT_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| anyhow!(Error::Config(format!("LSPKIT_THREADS must be a positive integer, got '{v}'"))))?;
        if n == 0 {
            bail!(Error::Config("LSPKIT_THREADS must be positive".into()));
        }
        par::init_threads(n);
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    cli.opts.check()?;
    init_threads()?;
    let o = &cli.opts;
    match &cli.cmd {
        Command::Train { skill, domain, library } => cmd_train(skill, domain.as_deref(), library, o),
        Command::Plan { problem, library, config, out } => cmd_plan(problem, library.as_deref(), config.as_deref(), out, o),
        Command::Verify { solution, problem, library } => cmd_verify(solution, problem, library.as_deref()),
        Command::Bench { suite, library, out } => cmd_bench(suite, library, out, o),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "lspkit=debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
