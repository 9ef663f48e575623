use lspkit::skills::{gamma_map, DomainParams, SkillKind, SkillMdp};
use lspkit::wrap_angle;
use proptest::prelude::*;

fn mdp(kind: SkillKind) -> (SkillMdp, Vec<usize>) {
    let p = DomainParams::default();
    (SkillMdp::new(kind, &p).unwrap(), p.skill(kind).unwrap().dims.clone())
}

fn kinds() -> impl Strategy<Value = SkillKind> {
    prop::sample::select(vec![SkillKind::Push, SkillKind::Pull, SkillKind::Pick, SkillKind::Place])
}

fn any_kind() -> impl Strategy<Value = SkillKind> {
    prop::sample::select(SkillKind::ALL.to_vec())
}

fn lh_state() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.4f64..0.4, 15)
}

/// A state on the box boundary (continuous part) with a valid face.
fn boundary_state(m: &SkillMdp, picks: &[bool], face: usize) -> Vec<f64> {
    let mut x: Vec<f64> = (0..m.state_lower.len()).map(|k| if picks[k] { m.state_upper[k] } else { m.state_lower[k] }).collect();
    x.extend(m.state_categories.iter().map(|&c| (face % c) as f64));
    x
}

/// Action pushing every continuous state dim outwards at full speed.
fn outward_action(m: &SkillMdp, picks: &[bool], face: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..m.action_lower.len())
        .map(|k| if picks.get(k).copied().unwrap_or(true) { m.action_upper[k] } else { m.action_lower[k] })
        .collect();
    u.extend(m.action_categories.iter().map(|&c| (face % c) as f64));
    u
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gamma_is_zero_iff_skill_dims_coincide(kind in kinds(), start in lh_state(), goal in lh_state(), copy in any::<bool>()) {
        let (m, dims) = mdp(kind);
        let mut goal = goal;
        if copy {
            for &d in &dims {
                goal[d] = start[d];
            }
        }
        let s = gamma_map(&m, &dims, &start, &goal);
        let continuous = if kind == SkillKind::Push { 3 } else { s.len() };
        let zero = s[..continuous].iter().all(|v| v.abs() <= 1e-12);
        let same = dims.iter().all(|&d| wrap_angle(start[d] - goal[d]).abs() <= 1e-12);
        prop_assert_eq!(zero, same);
    }

    #[test]
    fn boundary_steps_stay_in_the_box(kind in any_kind(), picks in prop::collection::vec(any::<bool>(), 8), face in 0usize..4) {
        let (m, _) = mdp(kind);
        let x = boundary_state(&m, &picks, face);
        let u = outward_action(&m, &picks, face);
        let y = m.step(&x, &u);
        prop_assert!(m.in_bounds(&y), "{:?} -> {:?}", x, y);
        prop_assert_eq!(y.clone(), m.step(&x, &u));
    }

    #[test]
    fn rewards_are_non_positive(kind in any_kind(), r in prop::collection::vec(0.0f64..1.0, 16), face in 0usize..4) {
        let (m, _) = mdp(kind);
        let nc = m.state_lower.len();
        let mut x: Vec<f64> = (0..nc).map(|k| m.state_lower[k] + r[k] * (m.state_upper[k] - m.state_lower[k])).collect();
        x.extend(m.state_categories.iter().map(|&c| (face % c) as f64));
        let na = m.action_lower.len();
        let mut u: Vec<f64> = (0..na).map(|k| m.action_lower[k] + r[8 + k] * (m.action_upper[k] - m.action_lower[k])).collect();
        u.extend(m.action_categories.iter().map(|&c| ((face + 1) % c) as f64));
        prop_assert!(m.reward(&x, &u) <= 0.0);
    }
}

#[test]
fn reward_is_zero_only_at_rest_on_target() {
    for kind in SkillKind::ALL {
        let (m, _) = mdp(kind);
        let mut x = vec![0.0; m.state_dim()];
        let mut u = vec![0.0; m.action_dim()];
        assert_eq!(m.reward(&x, &u), 0.0, "{kind}");
        u[0] = m.action_upper[0];
        assert!(m.reward(&x, &u) < 0.0, "{kind}");
        u[0] = 0.0;
        x[0] = if kind == SkillKind::Pivot { 0.3 } else { 0.01 };
        assert!(m.reward(&x, &u) < 0.0, "{kind}");
        if kind == SkillKind::Push {
            let x = vec![0.0; 5];
            let mut u = vec![0.0; 3];
            u[2] = 1.0;
            assert!(m.reward(&x, &u) < 0.0);
        }
    }
}

#[test]
fn yaw_difference_across_the_seam_is_small() {
    let (m, dims) = mdp(SkillKind::Pull);
    let mut a = vec![0.0; 12];
    let mut b = vec![0.0; 12];
    a[5] = 3.1;
    b[5] = -3.1;
    let s = gamma_map(&m, &dims, &a, &b);
    assert!(s[2].abs() <= 0.2, "{}", s[2]);
}
