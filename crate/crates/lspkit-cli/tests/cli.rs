use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use lspkit::skills::{DomainParams, SkillKind};
use lspkit::value::{Skill, SkillLibrary};
use serde_json::{json, Value};

const SLIDE: &str = r#"{
    "name": "slide", "predicates": ["Moved", "Flipped"], "entities": {"o": "object"},
    "initial_state": [],
    "operators": [
        {"name": "pull_any", "pre_not": ["(Moved o)"], "add": ["(Moved o)"], "actuated": [0, 1, 5]},
        {"name": "pivot", "pre": ["(Moved o)"], "add": ["(Flipped o)"], "actuated": [3],
         "constraints": [{"kind": "discrete", "dim": 3, "values": [0.0, 1.5707963267948966]}]}
    ]
}"#;

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

/// Coarse pivot plus pull, with the slide domain written next to it.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let mut p = DomainParams::default();
        let pv = p.skills.get_mut(&SkillKind::Pivot).unwrap();
        pv.grid = vec![33, 33];
        pv.action_max = vec![4.0 * 2.0 * PI / 32.0 / p.dt];
        let mut lib = SkillLibrary::new(p.clone());
        for k in [SkillKind::Pivot, SkillKind::Pull] {
            lib.insert(Skill::train(k, &p, 0).unwrap());
        }
        lib.save(&dir.path().join("library")).unwrap();
        std::fs::write(dir.path().join("slide.json"), SLIDE).unwrap();
        let mut no_pivot: Value = serde_json::from_str(SLIDE).unwrap();
        no_pivot["operators"].as_array_mut().unwrap().retain(|o| o["name"] != "pivot");
        std::fs::write(dir.path().join("no_pivot.json"), no_pivot.to_string()).unwrap();
        Fixture { dir }
    })
}

fn state(x: f64, y: f64, roll: f64, yaw: f64) -> Vec<f64> {
    let mut v = vec![0.0; 12];
    v[0] = x;
    v[1] = y;
    v[3] = roll;
    v[5] = yaw;
    v
}

fn problem(f: &Fixture, name: &str, domain: &str, initial: Vec<f64>, target: Vec<f64>) -> PathBuf {
    let path = f.path(name);
    let v = json!({
        "domain": domain, "library": "library", "initial": initial, "target": target,
        "position_tol": 0.05, "orientation_tol": 0.3,
    });
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lspkit")).args(args).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_skill_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = run(&["train", "juggle", "--library", s(dir.path())]);
    assert_eq!(code, 2, "{out}");
}

#[test]
fn bad_overrides_are_rejected() {
    let f = fixture();
    let p = problem(f, "bad.json", "slide.json", state(0.2, 0.0, 0.0, 0.0), state(0.0, 0.0, FRAC_PI_2, 0.0));
    let (code, out) = run(&["plan", "--problem", s(&p), "--eps", "-1"]);
    assert_eq!(code, 2, "{out}");
}

#[test]
fn plan_then_verify_and_catch_tampering() {
    let f = fixture();
    let p = problem(f, "flip.json", "slide.json", state(0.2, -0.1, 0.0, 0.4), state(-0.1, 0.15, FRAC_PI_2, -0.3));
    let out = f.path("flip_out.json");
    let (code, text) = run(&["plan", "--problem", s(&p), "--out", s(&out), "--max-solutions", "1"]);
    assert_eq!(code, 0, "{text}");
    assert!(text.starts_with("config: "), "{text}");
    assert!(text.contains("pull_any -> pivot"), "{text}");

    let (code, text) = run(&["verify", s(&out), "--problem", s(&p)]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("solved"), "{text}");

    let mut plan: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let sol = &mut plan["result"]["solutions"][0];
    let last = sol["subgoals"].as_array().unwrap().len() - 1;
    sol["subgoals"][last][3] = json!(1.0);
    let tampered = f.path("flip_tampered.json");
    std::fs::write(&tampered, plan.to_string()).unwrap();
    let (code, text) = run(&["verify", s(&tampered), "--problem", s(&p)]);
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("pivot: violates object.roll in"), "{text}");
}

#[test]
fn unreachable_target_reports_best_infeasible() {
    let f = fixture();
    let p = problem(f, "stuck.json", "no_pivot.json", state(0.1, 0.0, 0.0, 0.0), state(0.0, 0.0, 1.2, 0.0));
    let out = f.path("stuck_out.json");
    let (code, text) = run(&["plan", "--problem", s(&p), "--out", s(&out)]);
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("best infeasible"), "{text}");
    assert!(text.contains("pull_any"), "{text}");
}

#[test]
fn target_at_the_start_needs_no_skills() {
    let f = fixture();
    let x = state(0.1, 0.0, 0.0, 0.2);
    let p = problem(f, "here.json", "slide.json", x.clone(), x);
    let out = f.path("here_out.json");
    let (code, text) = run(&["plan", "--problem", s(&p), "--out", s(&out)]);
    assert_eq!(code, 0, "{text}");
    let plan: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(plan["result"]["solutions"][0]["skeleton"], json!([]));
    let (code, text) = run(&["verify", s(&out), "--problem", s(&p)]);
    assert_eq!(code, 0, "{text}");
}

#[test]
fn empty_suite_writes_an_empty_report() {
    let f = fixture();
    let suite = f.path("empty_suite.json");
    std::fs::write(&suite, r#"{"name": "empty"}"#).unwrap();
    let out = f.path("empty_bench");
    let (code, text) = run(&["bench", "--suite", s(&suite), "--library", s(&f.path("library")), "--out", s(&out)]);
    assert_eq!(code, 0, "{text}");
    assert!(text.starts_with("config: "), "{text}");
    let csv = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn bench_without_trained_skills_names_them() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.json");
    std::fs::write(&suite, r#"{"name": "npm", "domains": ["npm"], "methods": ["cem"], "seeds": [0]}"#).unwrap();
    let (code, text) = run(&["bench", "--suite", s(&suite), "--library", s(&dir.path().join("nothing")), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("untrained skills: pivot, pull, push"), "{text}");
}

#[test]
fn invalid_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lspkit"))
        .args(["train", "pivot", "--library", s(dir.path())])
        .env("LSPKIT_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
