use std::f64::consts::PI;
use std::sync::OnceLock;

use lspkit::skills::{DomainParams, SkillKind};
use lspkit::value::{dense_value_iteration, rollout, value_prediction_agreement, Skill};
use proptest::prelude::*;

fn small_params(n: usize) -> DomainParams {
    let mut p = DomainParams::default();
    let sp = p.skills.get_mut(&SkillKind::Pivot).unwrap();
    sp.grid = vec![n, n];
    sp.action_max = vec![4.0 * 2.0 * PI / (n - 1) as f64 / p.dt];
    p
}

fn pivot() -> &'static Skill {
    static SKILL: OnceLock<Skill> = OnceLock::new();
    SKILL.get_or_init(|| Skill::train(SkillKind::Pivot, &small_params(33), 0).unwrap())
}

#[test]
fn tabular_iteration_decreases_monotonically() {
    let p = small_params(9);
    let sk = Skill::train(SkillKind::Pivot, &p, 0).unwrap();
    let grid = sk.mdp.grid(&sk.params.grid).unwrap();
    let cands = sk.mdp.candidates(&sk.params.train_candidates).unwrap();
    let mut prev = vec![0.0; 81];
    for k in 1..=40 {
        let (table, _) = dense_value_iteration(&sk.mdp, &grid, &cands, 0.0, k).unwrap();
        for (a, b) in table.values().iter().zip(&prev) {
            assert!(*a <= b + 1e-12, "iteration {k}: {a} > {b}");
        }
        prev = table.values().to_vec();
    }
    let (fixed, _) = dense_value_iteration(&sk.mdp, &grid, &cands, 1e-10, 2000).unwrap();
    let gap = fixed.values().iter().zip(sk.vf.table().values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap <= 1e-2, "TT iteration is {gap} away from the tabular fixed point");
}

#[test]
fn agreement_is_deterministic() {
    let sk = pivot();
    let policy = sk.policy().unwrap();
    let returns = |x: &[f64]| rollout(&sk.mdp, &policy, x, sk.params.horizon).cumulative;
    let a = value_prediction_agreement(&sk.mdp, |x| sk.vf.value(x), returns, 200, 11).unwrap();
    let b = value_prediction_agreement(&sk.mdp, |x| sk.vf.value(x), returns, 200, 11).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn greedy_rollouts_do_not_lose_value(a in -PI..PI, b in -PI..PI) {
        let sk = pivot();
        let policy = sk.policy().unwrap();
        let r = rollout(&sk.mdp, &policy, &[a, b], sk.params.horizon);
        let slack = 5.0 * sk.params.eps;
        for (x, u) in r.states.iter().zip(&r.actions) {
            let y = sk.mdp.step(x, u);
            let drop = sk.vf.value(x) - sk.vf.value(&y);
            prop_assert!(drop <= sk.mdp.reward(x, u).abs() + slack, "{x:?} -> {y:?}: drop {drop}");
        }
    }
}
