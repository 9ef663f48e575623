//! TT-cross: build a tensor train from point queries.
//!
//! Two-site (DMRG-style) alternating sweeps. Each supercore
//! `f(I_k, i_k, i_{k+1}, J_{k+2})` is split by a fully pivoted skeleton
//! decomposition, which fixes the new rank, and the pivot rows (or columns) are
//! then polished with maxvol before becoming the next index set.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::maxvol::{maxvol_refine, right_solve, MAXVOL_TOL};
use super::{Core, Grid, TensorTrain};
use crate::{par, Error, Result};

/// Grids up to this many nodes cache oracle values in a flat array.
const DENSE_CACHE_LIMIT: u128 = 1 << 22;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossConfig {
    /// Stop when the relative Frobenius change between half-sweeps is at most this.
    pub eps: f64,
    pub max_rank: usize,
    pub max_sweeps: usize,
    /// Skeleton truncation, relative to the largest supercore entry.
    pub pivot_tol: f64,
    pub init_rank: usize,
    pub seed: u64,
}

impl CrossConfig {
    pub fn new(eps: f64, max_rank: usize) -> Self {
        Self {
            eps,
            max_rank,
            max_sweeps: 25,
            pivot_tol: eps / 10.0,
            init_rank: 2,
            seed: 0,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!("cross eps must be positive, got {}", self.eps)));
        }
        if self.max_rank == 0 {
            return Err(Error::Config("max_rank must be at least 1".into()));
        }
        if !(self.pivot_tol >= 0.0) {
            return Err(Error::Config("pivot_tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossReport {
    pub converged: bool,
    /// Half-sweeps performed.
    pub sweeps: usize,
    /// Distinct oracle calls.
    pub evaluations: usize,
    /// Last relative change between consecutive half-sweeps.
    pub change: f64,
}

/// Right index sets from a finished run, reusable as a warm start.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossState {
    counts: Vec<usize>,
    right: Vec<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone)]
pub struct CrossOutput {
    pub tt: TensorTrain,
    pub report: CrossReport,
    pub state: CrossState,
}

/// Approximate `oracle` on `grid` with default sweep settings.
pub fn tt_cross<F>(oracle: F, grid: &Grid, eps: f64, max_rank: usize) -> Result<(TensorTrain, CrossReport)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let g = grid.clone();
    let out = cross_indexed(|idx: &[usize]| oracle(&g.point(idx)), grid, &CrossConfig::new(eps, max_rank), None)?;
    Ok((out.tt, out.report))
}

/// TT-cross over grid indices. `warm` reuses index sets from an earlier run on the same grid.
pub fn cross_indexed<F>(oracle: F, grid: &Grid, cfg: &CrossConfig, warm: Option<&CrossState>) -> Result<CrossOutput>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    cfg.check()?;
    let mut ev = Evaluator::new(&oracle, grid)?;
    let n = grid.counts().to_vec();
    let d = n.len();

    if d == 1 {
        let idx: Vec<Vec<usize>> = (0..n[0]).map(|i| vec![i]).collect();
        let keys: Vec<u128> = (0..n[0] as u128).collect();
        let vals = ev.values(&keys, |k| idx[k as usize].clone())?;
        let tt = TensorTrain::new(vec![Core::new(1, n[0], 1, vals)?], grid.clone())?;
        return Ok(CrossOutput {
            tt,
            report: CrossReport { converged: true, sweeps: 1, evaluations: ev.calls, change: 0.0 },
            state: CrossState { counts: n, right: vec![vec![vec![]]; 2] },
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut right: Vec<Vec<Vec<usize>>> = match warm {
        Some(w) if w.counts == n => w.right.clone(),
        _ => random_right_sets(&n, cfg.init_rank.max(1), &mut rng),
    };
    right[d] = vec![vec![]];
    let mut left: Vec<Vec<Vec<usize>>> = vec![Vec::new(); d + 1];
    left[0] = vec![vec![]];

    let mut cores: Vec<Core> = n.iter().map(|&nk| Core::zeros(1, nk, 1)).collect();
    let mut prev: Option<TensorTrain> = None;
    let mut report = CrossReport { change: f64::INFINITY, ..Default::default() };

    'outer: for _ in 0..cfg.max_sweeps {
        for dir in [Dir::Forward, Dir::Backward] {
            match dir {
                Dir::Forward => {
                    for k in 0..d - 1 {
                        let (rows_n, cols_n) = (left[k].len() * n[k], n[k + 1] * right[k + 2].len());
                        let a = ev.supercore(&left[k], k, &right[k + 2])?;
                        let (prow, pcol) = skeleton(&a, rows_n, cols_n, cfg.pivot_tol, cfg.max_rank);
                        let am = DMatrix::from_row_slice(rows_n, cols_n, &a);
                        let (rows, u) = left_factor(&am, prow, pcol)?;
                        let r = rows.len();
                        left[k + 1] = rows
                            .iter()
                            .map(|&row| {
                                let mut v = left[k][row / n[k]].clone();
                                v.push(row % n[k]);
                                v
                            })
                            .collect();
                        cores[k] = core_from_rows(&u, left[k].len(), n[k], r);
                        if k == d - 2 {
                            let sel = am.select_rows(&rows);
                            cores[d - 1] = core_from_cols(&sel, r, n[d - 1], 1);
                        }
                    }
                }
                Dir::Backward => {
                    for k in (1..d).rev() {
                        let (rows_n, cols_n) = (left[k - 1].len() * n[k - 1], n[k] * right[k + 1].len());
                        let a = ev.supercore(&left[k - 1], k - 1, &right[k + 1])?;
                        let (prow, pcol) = skeleton(&a, rows_n, cols_n, cfg.pivot_tol, cfg.max_rank);
                        let am = DMatrix::from_row_slice(rows_n, cols_n, &a);
                        let (cols, w) = right_factor(&am, prow, pcol)?;
                        let r = cols.len();
                        let rr = right[k + 1].len();
                        right[k] = cols
                            .iter()
                            .map(|&col| {
                                let mut v = vec![col / rr];
                                v.extend_from_slice(&right[k + 1][col % rr]);
                                v
                            })
                            .collect();
                        cores[k] = core_from_cols(&w, r, n[k], rr);
                        if k == 1 {
                            let sel = am.select_columns(&cols);
                            cores[0] = core_from_rows(&sel, 1, n[0], r);
                        }
                    }
                }
            }
            report.sweeps += 1;
            let tt = TensorTrain::new(cores.clone(), grid.clone())?;
            if let Some(p) = &prev {
                let nrm = tt.norm();
                let diff = tt.distance(p)?;
                report.change = if nrm > 0.0 { diff / nrm } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
                if report.change <= cfg.eps {
                    report.converged = true;
                    prev = Some(tt);
                    break 'outer;
                }
            }
            prev = Some(tt);
        }
    }

    report.evaluations = ev.calls;
    let tt = prev.expect("at least one half-sweep ran");
    Ok(CrossOutput { tt, report, state: CrossState { counts: n, right } })
}

#[derive(Clone, Copy)]
enum Dir {
    Forward,
    Backward,
}

fn random_right_sets(n: &[usize], r: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Vec<usize>>> {
    let d = n.len();
    let mut right = vec![Vec::new(); d + 1];
    for (k, set) in right.iter_mut().enumerate().take(d).skip(1) {
        let cap: u128 = n[k..].iter().fold(1u128, |acc, &x| acc.saturating_mul(x as u128));
        let want = (r as u128).min(cap) as usize;
        while set.len() < want {
            let v: Vec<usize> = n[k..].iter().map(|&nk| rng.random_range(0..nk)).collect();
            if !set.contains(&v) {
                set.push(v);
            }
        }
    }
    right
}

/// Fully pivoted Gaussian elimination on a row-major `m x n` matrix. Returns
/// pivot rows and columns; stops once the residual is below `tol * max|A|`.
fn skeleton(a: &[f64], m: usize, n: usize, tol: f64, max_rank: usize) -> (Vec<usize>, Vec<usize>) {
    let mut res = a.to_vec();
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    if scale == 0.0 {
        return (rows, cols);
    }
    let cap = max_rank.min(m).min(n);
    while rows.len() < cap {
        let (mut bi, mut best) = (0usize, 0.0f64);
        for (p, v) in res.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                bi = p;
            }
        }
        if best <= tol * scale || best == 0.0 {
            break;
        }
        let (i, j) = (bi / n, bi % n);
        rows.push(i);
        cols.push(j);
        let piv = res[bi];
        let col: Vec<f64> = (0..m).map(|r| res[r * n + j]).collect();
        let row: Vec<f64> = res[i * n..(i + 1) * n].to_vec();
        for (r, &c) in col.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let f = c / piv;
            for (x, &y) in res[r * n..(r + 1) * n].iter_mut().zip(&row) {
                *x -= f * y;
            }
        }
    }
    (rows, cols)
}

/// Interpolative left basis `A[:, cols] A[rows, cols]^-1`, rows refined by maxvol.
fn left_factor(a: &DMatrix<f64>, rows: Vec<usize>, cols: Vec<usize>) -> Result<(Vec<usize>, DMatrix<f64>)> {
    if rows.is_empty() {
        let mut u = DMatrix::zeros(a.nrows(), 1);
        u[(0, 0)] = 1.0;
        return Ok((vec![0], u));
    }
    let c = a.select_columns(&cols);
    let b = right_solve(&c, &rows)?;
    maxvol_refine(b, rows, MAXVOL_TOL, 4 * cols.len() + 16)
}

/// Interpolative right basis `A[rows, cols]^-1 A[rows, :]`, columns refined by maxvol.
fn right_factor(a: &DMatrix<f64>, rows: Vec<usize>, cols: Vec<usize>) -> Result<(Vec<usize>, DMatrix<f64>)> {
    if rows.is_empty() {
        let mut w = DMatrix::zeros(1, a.ncols());
        w[(0, 0)] = 1.0;
        return Ok((vec![0], w));
    }
    let r = a.select_rows(&rows).transpose();
    let b = right_solve(&r, &cols)?;
    let (cols, b) = maxvol_refine(b, cols, MAXVOL_TOL, 4 * rows.len() + 16)?;
    Ok((cols, b.transpose()))
}

/// Core from a matrix whose rows are `(a, i)` pairs and columns the right rank.
fn core_from_rows(u: &DMatrix<f64>, r0: usize, n: usize, r1: usize) -> Core {
    let mut c = Core::zeros(r0, n, r1);
    for row in 0..r0 * n {
        for b in 0..r1 {
            c.data[row * r1 + b] = u[(row, b)];
        }
    }
    c
}

/// Core from a matrix whose rows are the left rank and columns `(i, b)` pairs.
fn core_from_cols(w: &DMatrix<f64>, r0: usize, n: usize, r1: usize) -> Core {
    let mut c = Core::zeros(r0, n, r1);
    for a in 0..r0 {
        for col in 0..n * r1 {
            c.data[a * n * r1 + col] = w[(a, col)];
        }
    }
    c
}

enum Cache {
    Dense(Vec<f64>),
    Sparse(HashMap<u128, f64>),
}

struct Evaluator<'a, F> {
    f: &'a F,
    counts: Vec<usize>,
    strides: Vec<u128>,
    cache: Cache,
    calls: usize,
}

impl<'a, F> Evaluator<'a, F>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    fn new(f: &'a F, grid: &Grid) -> Result<Self> {
        let counts = grid.counts().to_vec();
        let size = grid
            .size()
            .ok_or_else(|| Error::Config("grid too large to index".into()))?;
        let mut strides = vec![1u128; counts.len()];
        for k in (0..counts.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * counts[k + 1] as u128;
        }
        let cache = if size <= DENSE_CACHE_LIMIT {
            Cache::Dense(vec![f64::NAN; size as usize])
        } else {
            Cache::Sparse(HashMap::new())
        };
        Ok(Self { f, counts, strides, cache, calls: 0 })
    }

    fn lookup(&self, key: u128) -> Option<f64> {
        match &self.cache {
            Cache::Dense(v) => {
                let x = v[key as usize];
                (!x.is_nan()).then_some(x)
            }
            Cache::Sparse(m) => m.get(&key).copied(),
        }
    }

    fn values<D>(&mut self, keys: &[u128], decode: D) -> Result<Vec<f64>>
    where
        D: Fn(u128) -> Vec<usize>,
    {
        let mut missing: Vec<u128> = keys.iter().copied().filter(|&k| self.lookup(k).is_none()).collect();
        missing.sort_unstable();
        missing.dedup();
        if !missing.is_empty() {
            let f = self.f;
            let idxs: Vec<Vec<usize>> = missing.iter().map(|&k| decode(k)).collect();
            let vals = par::map(&idxs, |idx| f(idx));
            for ((k, v), idx) in missing.iter().zip(&vals).zip(&idxs) {
                if !v.is_finite() {
                    return Err(Error::Numeric(format!("oracle returned {v} at index {idx:?}")));
                }
                match &mut self.cache {
                    Cache::Dense(c) => c[*k as usize] = *v,
                    Cache::Sparse(m) => {
                        m.insert(*k, *v);
                    }
                }
            }
            self.calls += missing.len();
        }
        Ok(keys.iter().map(|&k| self.lookup(k).expect("filled above")).collect())
    }

    /// Row-major `(|left| * n_k) x (n_{k+1} * |right|)` supercore at modes `k, k+1`.
    fn supercore(&mut self, left: &[Vec<usize>], k: usize, right: &[Vec<usize>]) -> Result<Vec<f64>> {
        let (nk, nk1) = (self.counts[k], self.counts[k + 1]);
        let lkeys: Vec<u128> = left
            .iter()
            .map(|l| l.iter().enumerate().map(|(j, &i)| i as u128 * self.strides[j]).sum())
            .collect();
        let rkeys: Vec<u128> = right
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, &i)| i as u128 * self.strides[k + 2 + j]).sum())
            .collect();
        let (sk, sk1) = (self.strides[k], self.strides[k + 1]);
        let mut keys = Vec::with_capacity(lkeys.len() * nk * nk1 * rkeys.len());
        for &lk in &lkeys {
            for i in 0..nk {
                for j in 0..nk1 {
                    for &rk in &rkeys {
                        keys.push(lk + i as u128 * sk + j as u128 * sk1 + rk);
                    }
                }
            }
        }
        let decode = Self::decoder(self.counts.clone());
        self.values(&keys, decode)
    }

    fn decoder(counts: Vec<usize>) -> impl Fn(u128) -> Vec<usize> {
        move |mut key| {
            let mut idx = vec![0; counts.len()];
            for k in (0..counts.len()).rev() {
                let n = counts[k] as u128;
                idx[k] = (key % n) as usize;
                key /= n;
            }
            idx
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn max_err_2d(tt: &TensorTrain, f: impl Fn(f64, f64) -> f64) -> f64 {
        let g = tt.grid();
        let mut worst = 0.0f64;
        for i in 0..g.counts()[0] {
            for j in 0..g.counts()[1] {
                let p = g.point(&[i, j]);
                worst = worst.max((tt.evaluate(&[i, j]).unwrap() - f(p[0], p[1])).abs());
            }
        }
        worst
    }

    #[test]
    fn constant_is_rank_one_and_exact() {
        let g = Grid::uniform(4, -1.0, 1.0, 7).unwrap();
        let (tt, rep) = tt_cross(|_| 5.0, &g, 1e-6, 10).unwrap();
        assert!(rep.converged);
        assert_eq!(tt.max_rank(), 1);
        assert!((tt.evaluate(&[1, 6, 3, 0]).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn sin_plus_cos_on_32_by_32() {
        let g = Grid::uniform(2, -1.0, 1.0, 32).unwrap();
        let f = |x: f64, y: f64| x.sin() + y.cos();
        let (tt, rep) = tt_cross(|p| f(p[0], p[1]), &g, 1e-3, 100).unwrap();
        assert!(rep.converged);
        assert!(max_err_2d(&tt, f) <= 1e-2);
    }

    #[test]
    fn product_plus_one_has_rank_two() {
        let g = Grid::uniform(2, -1.0, 1.0, 20).unwrap();
        let (tt, _) = tt_cross(|p| p[0] * p[1] + 1.0, &g, 1e-6, 4).unwrap();
        assert!(tt.max_rank() <= 2);
        assert!(max_err_2d(&tt, |x, y| x * y + 1.0) < 1e-10);
    }

    #[test]
    fn known_low_rank_in_five_dims() {
        // sum of two separable terms: TT-rank 2
        let g = Grid::uniform(5, 0.0, 1.0, 9).unwrap();
        let f = |p: &[f64]| p.iter().map(|x| (1.0 + x).ln() + 0.5).product::<f64>() + p.iter().sum::<f64>();
        let eps = 1e-4;
        let (tt, rep) = tt_cross(f, &g, eps, 10).unwrap();
        assert!(rep.converged);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut num, mut den) = (0.0, 0.0);
        for _ in 0..500 {
            let idx: Vec<usize> = (0..5).map(|_| rng.random_range(0..9)).collect();
            let want = f(&g.point(&idx));
            num += (tt.evaluate(&idx).unwrap() - want).powi(2);
            den += want * want;
        }
        assert!((num / den).sqrt() <= 10.0 * eps);
        assert!(tt.max_rank() <= 3);
    }

    #[test]
    fn one_dimensional_is_tabulation() {
        let g = Grid::uniform(1, 0.0, 2.0, 11).unwrap();
        let (tt, rep) = tt_cross(|p| p[0] * p[0], &g, 1e-3, 5).unwrap();
        assert_eq!(rep.evaluations, 11);
        assert!((tt.evaluate(&[10]).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn non_finite_oracle_is_an_error() {
        let g = Grid::uniform(2, 0.0, 1.0, 5).unwrap();
        let err = tt_cross(|p| if p[0] > 0.5 { f64::NAN } else { 1.0 }, &g, 1e-3, 4).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn bad_config_rejected() {
        let g = Grid::uniform(2, 0.0, 1.0, 5).unwrap();
        assert!(tt_cross(|_| 1.0, &g, 0.0, 4).is_err());
        assert!(tt_cross(|_| 1.0, &g, 1e-3, 0).is_err());
    }

    #[test]
    fn ranks_respect_cap() {
        let g = Grid::uniform(3, -1.0, 1.0, 12).unwrap();
        let f = |p: &[f64]| (3.0 * p[0] * p[1] - p[2]).sin() + (p[0] - 2.0 * p[2]).cos();
        let (tt, _) = tt_cross(f, &g, 1e-8, 3).unwrap();
        assert!(tt.ranks().iter().all(|&r| r <= 3));
    }

    #[test]
    fn warm_start_reuses_sets() {
        let g = Grid::uniform(3, -1.0, 1.0, 10).unwrap();
        let f = |idx: &[usize]| ((idx[0] + 2 * idx[1]) as f64 * 0.1).sin() + idx[2] as f64 * 0.05;
        let cfg = CrossConfig::new(1e-6, 20);
        let cold = cross_indexed(f, &g, &cfg, None).unwrap();
        let warm = cross_indexed(f, &g, &cfg, Some(&cold.state)).unwrap();
        assert!(warm.report.converged);
        assert!(warm.report.sweeps <= cold.report.sweeps);
        assert!(warm.tt.distance(&cold.tt).unwrap() <= 1e-5 * cold.tt.norm());
    }

    #[test]
    fn deterministic() {
        let g = Grid::uniform(3, -1.0, 1.0, 8).unwrap();
        let f = |p: &[f64]| (p[0] + p[1] * p[2]).exp();
        let a = tt_cross(f, &g, 1e-4, 8).unwrap().0;
        let b = tt_cross(f, &g, 1e-4, 8).unwrap().0;
        assert_eq!(a, b);
    }
}
