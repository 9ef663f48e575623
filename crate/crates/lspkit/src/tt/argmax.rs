use super::TensorTrain;
use crate::{Error, Result};

pub const DEFAULT_CANDIDATES: usize = 50;

/// Approximate maximizer of a tensor train by prioritized traversal of its cores.
///
/// Prefixes are grown one mode at a time. A prefix is scored by its left
/// partial product contracted with the mean of all completions; for every value
/// of the newest index the `candidates_per_mode` best prefixes survive. At the
/// last mode scores are exact values. No prefix is ever discarded when
/// `candidates_per_mode` is at least the number of prefixes sharing an index,
/// e.g. three modes with `candidates_per_mode >= n_0`, and then the result is
/// the exhaustive maximum.
pub fn tt_argmax(tt: &TensorTrain, candidates_per_mode: usize) -> Result<(Vec<usize>, f64)> {
    if candidates_per_mode == 0 {
        return Err(Error::Config("candidates_per_mode must be at least 1".into()));
    }
    let cores = tt.cores();
    let d = cores.len();

    // tails[k]: mean over modes k.. of the right partial products (length r_k)
    let mut tails: Vec<Vec<f64>> = vec![Vec::new(); d + 1];
    tails[d] = vec![1.0];
    for k in (0..d).rev() {
        let c = &cores[k];
        let mut t = vec![0.0; c.r0];
        for (a, ta) in t.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in 0..c.n {
                for b in 0..c.r1 {
                    s += c.at(a, i, b) * tails[k + 1][b];
                }
            }
            *ta = s / c.n as f64;
        }
        tails[k] = t;
    }

    struct Prefix {
        idx: Vec<usize>,
        vec: Vec<f64>,
        score: f64,
    }

    let mut beam = vec![Prefix { idx: Vec::new(), vec: vec![1.0], score: 0.0 }];
    for (k, c) in cores.iter().enumerate() {
        let mut by_value: Vec<Vec<Prefix>> = (0..c.n).map(|_| Vec::new()).collect();
        for p in &beam {
            for (i, slot) in by_value.iter_mut().enumerate() {
                let mut v = vec![0.0; c.r1];
                for (a, &pa) in p.vec.iter().enumerate() {
                    if pa == 0.0 {
                        continue;
                    }
                    for (b, vb) in v.iter_mut().enumerate() {
                        *vb += pa * c.at(a, i, b);
                    }
                }
                let score: f64 = v.iter().zip(&tails[k + 1]).map(|(x, y)| x * y).sum();
                let mut idx = p.idx.clone();
                idx.push(i);
                slot.push(Prefix { idx, vec: v, score });
            }
        }
        beam = Vec::new();
        for mut group in by_value {
            group.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.idx.cmp(&b.idx)));
            group.truncate(candidates_per_mode);
            beam.extend(group);
        }
    }
    let best = beam
        .into_iter()
        .reduce(|a, b| {
            if b.score > a.score || (b.score == a.score && b.idx < a.idx) {
                b
            } else {
                a
            }
        })
        .expect("grid has at least one node");
    Ok((best.idx, best.score))
}
