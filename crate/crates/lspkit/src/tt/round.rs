use nalgebra::DMatrix;

use super::{Core, TensorTrain};
use crate::{Error, Result};

/// Recompress `tt` so that the Frobenius error is at most `eps * ||tt||`.
///
/// Right-to-left QR orthogonalization, then a left-to-right sweep of truncated
/// SVDs with per-bond threshold `eps / sqrt(d - 1)`.
pub fn tt_round(tt: &TensorTrain, eps: f64) -> Result<TensorTrain> {
    if !(eps >= 0.0) {
        return Err(Error::Config(format!("rounding eps must be >= 0, got {eps}")));
    }
    let d = tt.dim();
    let mut cores: Vec<Core> = tt.cores().to_vec();
    if d == 1 {
        return Ok(tt.clone());
    }

    for k in (1..d).rev() {
        let c = &cores[k];
        let (r0, n, r1) = (c.r0, c.n, c.r1);
        // M is r0 x (n r1); M^T = Q R
        let m = DMatrix::from_row_slice(r0, n * r1, &c.data);
        let qr = m.transpose().qr();
        let q = qr.q(); // (n r1) x r'
        let r = qr.r(); // r' x r0
        let rp = q.ncols();
        let mut nc = Core::zeros(rp, n, r1);
        for a in 0..rp {
            for col in 0..n * r1 {
                nc.data[a * n * r1 + col] = q[(col, a)];
            }
        }
        cores[k] = nc;
        // previous core absorbs R^T on its right side
        let p = &cores[k - 1];
        let pm = DMatrix::from_row_slice(p.r0 * p.n, p.r1, &p.data);
        let merged = pm * r.transpose();
        cores[k - 1] = from_row_matrix(&merged, p.r0, p.n, rp);
    }

    let total = DMatrix::from_row_slice(1, cores[0].data.len(), &cores[0].data).norm();
    let delta = eps / ((d - 1) as f64).sqrt() * total;

    for k in 0..d - 1 {
        let c = &cores[k];
        let (r0, n) = (c.r0, c.n);
        let m = DMatrix::from_row_slice(r0 * n, c.r1, &c.data);
        let svd = m.svd(true, true);
        let u = svd.u.ok_or_else(|| Error::Numeric("svd without U".into()))?;
        let vt = svd.v_t.ok_or_else(|| Error::Numeric("svd without V".into()))?;
        let s = svd.singular_values;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        let mut keep = order.len();
        let mut tail = 0.0;
        while keep > 1 {
            let next = tail + s[order[keep - 1]].powi(2);
            if next.sqrt() > delta {
                break;
            }
            tail = next;
            keep -= 1;
        }
        let kept = &order[..keep];
        let uk = u.select_columns(kept);
        let mut svt = vt.select_rows(kept);
        for (row, &o) in kept.iter().enumerate() {
            let sv = s[o];
            svt.row_mut(row).iter_mut().for_each(|v| *v *= sv);
        }
        cores[k] = from_row_matrix(&uk, r0, n, keep);
        let nx = &cores[k + 1];
        let nm = DMatrix::from_row_slice(nx.r0, nx.n * nx.r1, &nx.data);
        let merged = svt * nm;
        cores[k + 1] = Core::new(keep, nx.n, nx.r1, row_major(&merged))?;
    }
    TensorTrain::new(cores, tt.grid().clone())
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn from_row_matrix(m: &DMatrix<f64>, r0: usize, n: usize, r1: usize) -> Core {
    Core { r0, n, r1, data: row_major(m) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tt::{random_tt, Grid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_gap(a: &TensorTrain, b: &TensorTrain, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = a.grid().counts().to_vec();
        (0..100)
            .map(|_| {
                let idx: Vec<usize> = counts.iter().map(|&n| rng.random_range(0..n)).collect();
                (a.evaluate(&idx).unwrap() - b.evaluate(&idx).unwrap()).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn lossless_at_zero() {
        let tt = random_tt(&[4, 5, 6, 3], &[1, 3, 4, 2, 1], 21);
        let r = tt_round(&tt, 0.0).unwrap();
        assert!(sample_gap(&tt, &r, 1) < 1e-10);
        for (a, b) in r.ranks().iter().zip(tt.ranks()) {
            assert!(*a <= b);
        }
    }

    #[test]
    fn inflated_constant_collapses() {
        // c = 0.5 * c + 0.5 * c written with rank 2 in the middle
        let g = Grid::uniform(3, 0.0, 1.0, 4).unwrap();
        let c0 = Core::new(1, 4, 2, vec![1.0; 8]).unwrap();
        let c1 = Core::new(2, 4, 2, [vec![0.5; 8], vec![0.5; 8]].concat()).unwrap();
        let c2 = Core::new(2, 4, 1, vec![3.0; 8]).unwrap();
        let tt = TensorTrain::new(vec![c0, c1, c2], g).unwrap();
        assert_eq!(tt.max_rank(), 2);
        let r = tt_round(&tt, 1e-10).unwrap();
        assert_eq!(r.ranks(), vec![1, 1, 1, 1]);
        assert!((r.evaluate(&[1, 2, 3]).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn rank_three_survives_tight_rounding() {
        let tt = random_tt(&[6, 6, 6], &[1, 3, 3, 1], 4);
        let r = tt_round(&tt, 1e-8).unwrap();
        assert!(sample_gap(&tt, &r, 2) < 1e-6);
        assert!(r.max_rank() <= 3);
    }

    #[test]
    fn error_within_eps() {
        let tt = random_tt(&[5, 5, 5, 5], &[1, 4, 5, 4, 1], 8);
        for eps in [1e-1, 1e-2, 0.3] {
            let r = tt_round(&tt, eps).unwrap();
            let rel = r.distance(&tt).unwrap() / tt.norm();
            assert!(rel <= eps * (1.0 + 1e-9), "eps {eps}: {rel}");
        }
    }
}
