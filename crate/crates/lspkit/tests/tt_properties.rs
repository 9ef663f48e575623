use lspkit::tt::{tt_argmax, tt_cross, tt_round, Core, Grid, TensorTrain};
use proptest::prelude::*;

fn build(counts: &[usize], ranks: &[usize], data: &[f64]) -> TensorTrain {
    let d = counts.len();
    let grid = Grid::new(vec![-1.0; d], vec![1.0; d], counts.to_vec()).unwrap();
    let mut off = 0;
    let cores = (0..d)
        .map(|k| {
            let n = ranks[k] * counts[k] * ranks[k + 1];
            let c = Core::new(ranks[k], counts[k], ranks[k + 1], data[off..off + n].to_vec()).unwrap();
            off += n;
            c
        })
        .collect();
    TensorTrain::new(cores, grid).unwrap()
}

/// Small 3-mode train with at most 512 entries, random ranks and cores.
fn small_tt() -> impl Strategy<Value = TensorTrain> {
    (prop::collection::vec(2usize..=8, 3), 1usize..=3, 1usize..=3).prop_flat_map(|(counts, r1, r2)| {
        let ranks = vec![1, r1, r2, 1];
        let n: usize = (0..3).map(|k| ranks[k] * counts[k] * ranks[k + 1]).sum();
        prop::collection::vec(-1.0f64..1.0, n).prop_map(move |data| build(&counts, &ranks, &data))
    })
}

/// Sum over bond indices, written out loop by loop.
fn contract(tt: &TensorTrain, i: [usize; 3]) -> f64 {
    let c = tt.cores();
    let mut s = 0.0;
    for a in 0..c[0].r1 {
        for b in 0..c[1].r1 {
            s += c[0].at(0, i[0], a) * c[1].at(a, i[1], b) * c[2].at(b, i[2], 0);
        }
    }
    s
}

fn all_indices(counts: &[usize]) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            for k in 0..counts[2] {
                out.push([i, j, k]);
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evaluate_matches_contraction(tt in small_tt()) {
        let dense = tt.to_dense().unwrap();
        for (flat, idx) in all_indices(tt.grid().counts()).into_iter().enumerate() {
            let want = contract(&tt, idx);
            prop_assert!((tt.evaluate(&idx).unwrap() - want).abs() <= 1e-12);
            prop_assert!((dense[flat] - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn interpolation_exact_at_nodes_and_bounded(tt in small_tt(), u in prop::collection::vec(0.0f64..1.0, 3)) {
        let g = tt.grid().clone();
        for idx in all_indices(g.counts()).into_iter().step_by(7) {
            let v = tt.interpolate(&g.point(&idx)).unwrap();
            prop_assert!((v - tt.evaluate(&idx).unwrap()).abs() <= 1e-12);
        }
        let x: Vec<f64> = u.iter().map(|t| -1.0 + 2.0 * t).collect();
        let base: Vec<usize> = (0..3).map(|k| g.locate(k, x[k]).unwrap().0).collect();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for corner in 0..8 {
            let idx: Vec<usize> = (0..3).map(|k| (base[k] + ((corner >> k) & 1)).min(g.counts()[k] - 1)).collect();
            let v = tt.evaluate(&idx).unwrap();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let v = tt.interpolate(&x).unwrap();
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{v} not in [{lo}, {hi}]");
    }

    #[test]
    fn full_budget_argmax_is_exhaustive(tt in small_tt()) {
        let (idx, v) = tt_argmax(&tt, 512).unwrap();
        let best = tt.to_dense().unwrap().into_iter().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(v, best);
        prop_assert_eq!(tt.evaluate(&idx).unwrap(), best);
    }

    #[test]
    fn rounding_never_grows_ranks_or_error(tt in small_tt(), eps in 1e-6f64..0.5) {
        let r = tt_round(&tt, eps).unwrap();
        for (a, b) in r.ranks().iter().zip(tt.ranks()) {
            prop_assert!(*a <= b);
        }
        let err = r.distance(&tt).unwrap();
        prop_assert!(err <= eps * tt.norm() * (1.0 + 1e-9) + 1e-12, "{err} > {eps} * {}", tt.norm());
    }

    #[test]
    fn cross_on_rank_two_sums(
        a in prop::collection::vec(-2.0f64..2.0, 4),
        b in prop::collection::vec(0.5f64..2.0, 4),
    ) {
        // f = prod cos(a_k x_k) + prod b_k exp(-x_k), TT-rank at most two.
        let grid = Grid::uniform(4, -1.0, 1.0, 12).unwrap();
        let f = |x: &[f64]| {
            (0..4).map(|k| (a[k] * x[k]).cos()).product::<f64>() + (0..4).map(|k| b[k] * (-x[k]).exp()).product::<f64>()
        };
        let eps = 1e-6;
        let (tt, _) = tt_cross(f, &grid, eps, 4).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        let n = 12usize.pow(4);
        for flat in (0..n).step_by(37) {
            let idx = [flat / 1728, flat / 144 % 12, flat / 12 % 12, flat % 12];
            let want = f(&grid.point(&idx));
            num += (tt.evaluate(&idx).unwrap() - want).powi(2);
            den += want * want;
        }
        prop_assert!((num / den).sqrt() <= 10.0 * eps, "relative error {}", (num / den).sqrt());
    }
}
