use serde::{Deserialize, Serialize};

use super::Grid;
use crate::{Error, Result};

/// Third-order core of shape `r0 x n x r1`, row-major: `data[(a * n + i) * r1 + b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Core {
    pub r0: usize,
    pub n: usize,
    pub r1: usize,
    pub data: Vec<f64>,
}

impl Core {
    pub fn new(r0: usize, n: usize, r1: usize, data: Vec<f64>) -> Result<Self> {
        if r0 == 0 || n == 0 || r1 == 0 {
            return Err(Error::Format(format!("empty core shape ({r0}, {n}, {r1})")));
        }
        if data.len() != r0 * n * r1 {
            return Err(Error::Format(format!(
                "core ({r0}, {n}, {r1}) expects {} entries, got {}",
                r0 * n * r1,
                data.len()
            )));
        }
        Ok(Self { r0, n, r1, data })
    }

    pub fn zeros(r0: usize, n: usize, r1: usize) -> Self {
        Self { r0, n, r1, data: vec![0.0; r0 * n * r1] }
    }

    #[inline]
    pub fn at(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[(a * self.n + i) * self.r1 + b]
    }

    #[inline]
    pub fn set(&mut self, a: usize, i: usize, b: usize, v: f64) {
        self.data[(a * self.n + i) * self.r1 + b] = v;
    }

    /// `out = v * G[:, i, :]`
    #[inline]
    fn left_mul(&self, v: &[f64], i: usize, out: &mut [f64]) {
        out[..self.r1].iter_mut().for_each(|o| *o = 0.0);
        for (a, &va) in v.iter().enumerate().take(self.r0) {
            if va == 0.0 {
                continue;
            }
            let row = &self.data[(a * self.n + i) * self.r1..][..self.r1];
            for (o, &g) in out.iter_mut().zip(row) {
                *o += va * g;
            }
        }
    }

    /// `out = v * ((1 - t) G[:, i, :] + t G[:, i + 1, :])`
    #[inline]
    fn left_mul_lerp(&self, v: &[f64], i: usize, t: f64, out: &mut [f64]) {
        out[..self.r1].iter_mut().for_each(|o| *o = 0.0);
        let s = 1.0 - t;
        for (a, &va) in v.iter().enumerate().take(self.r0) {
            if va == 0.0 {
                continue;
            }
            let r0 = &self.data[(a * self.n + i) * self.r1..][..self.r1];
            let r1 = &self.data[(a * self.n + i + 1) * self.r1..][..self.r1];
            for ((o, &g0), &g1) in out.iter_mut().zip(r0).zip(r1) {
                *o += va * (s * g0 + t * g1);
            }
        }
    }
}

/// A tensor train over a [`Grid`]. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorTrain {
    cores: Vec<Core>,
    grid: Grid,
}

impl TensorTrain {
    pub fn new(cores: Vec<Core>, grid: Grid) -> Result<Self> {
        if cores.len() != grid.dim() {
            return Err(Error::Format(format!(
                "{} cores for a {}-dimensional grid",
                cores.len(),
                grid.dim()
            )));
        }
        if cores[0].r0 != 1 || cores[cores.len() - 1].r1 != 1 {
            return Err(Error::Format("boundary ranks must be 1".into()));
        }
        for (k, c) in cores.iter().enumerate() {
            if c.n != grid.counts()[k] {
                return Err(Error::Format(format!(
                    "core {k} has mode size {} but grid has {}",
                    c.n,
                    grid.counts()[k]
                )));
            }
            if k + 1 < cores.len() && c.r1 != cores[k + 1].r0 {
                return Err(Error::Format(format!("rank mismatch between cores {k} and {}", k + 1)));
            }
        }
        Ok(Self { cores, grid })
    }

    /// Rank-1 train holding `value` everywhere.
    pub fn constant(grid: Grid, value: f64) -> Self {
        let d = grid.dim();
        let cores = (0..d)
            .map(|k| {
                let n = grid.counts()[k];
                let v = if k == 0 { value } else { 1.0 };
                Core { r0: 1, n, r1: 1, data: vec![v; n] }
            })
            .collect();
        Self { cores, grid }
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.cores.len()
    }

    /// Bond ranks `r_0 ..= r_d`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.cores.iter().map(|c| c.r0).collect();
        r.push(1);
        r
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    fn work_len(&self) -> usize {
        self.max_rank()
    }

    pub fn evaluate(&self, index: &[usize]) -> Result<f64> {
        if index.len() != self.dim() {
            return Err(Error::Format(format!(
                "index of length {} for a {}-dimensional train",
                index.len(),
                self.dim()
            )));
        }
        for (k, (&i, c)) in index.iter().zip(&self.cores).enumerate() {
            if i >= c.n {
                return Err(Error::Bounds { mode: k, index: i, size: c.n });
            }
        }
        Ok(self.evaluate_unchecked(index))
    }

    /// Product of core slices; the caller guarantees a valid index.
    pub fn evaluate_unchecked(&self, index: &[usize]) -> f64 {
        let w = self.work_len();
        let mut v = vec![0.0; w];
        let mut tmp = vec![0.0; w];
        v[0] = 1.0;
        for (c, &i) in self.cores.iter().zip(index) {
            c.left_mul(&v[..c.r0], i, &mut tmp);
            std::mem::swap(&mut v, &mut tmp);
        }
        v[0]
    }

    /// Multilinear interpolation inside the grid box.
    ///
    /// Each core is contracted with its two-point weights, so the cost is
    /// `O(d r^2)` rather than a sum over `2^d` vertices.
    pub fn interpolate(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim() {
            return Err(Error::Format(format!(
                "point of length {} for a {}-dimensional train",
                point.len(),
                self.dim()
            )));
        }
        let w = self.work_len();
        let mut v = vec![0.0; w];
        let mut tmp = vec![0.0; w];
        v[0] = 1.0;
        for (k, c) in self.cores.iter().enumerate() {
            let (i, t) = self.grid.locate(k, point[k])?;
            if t == 0.0 {
                c.left_mul(&v[..c.r0], i, &mut tmp);
            } else if t == 1.0 {
                c.left_mul(&v[..c.r0], i + 1, &mut tmp);
            } else {
                c.left_mul_lerp(&v[..c.r0], i, t, &mut tmp);
            }
            std::mem::swap(&mut v, &mut tmp);
        }
        Ok(v[0])
    }

    /// Full tensor in row-major order (last index fastest). Small grids only.
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        let size = self
            .grid
            .size()
            .filter(|&s| s <= (1u128 << 28))
            .ok_or_else(|| Error::Config("grid too large to densify".into()))? as usize;
        // rows: prefixes so far, each row a vector of the current bond rank
        let mut cur = vec![1.0];
        let mut rows = 1usize;
        for c in &self.cores {
            let mut next = vec![0.0; rows * c.n * c.r1];
            for p in 0..rows {
                let v = &cur[p * c.r0..(p + 1) * c.r0];
                for i in 0..c.n {
                    let out = &mut next[(p * c.n + i) * c.r1..][..c.r1];
                    c.left_mul(v, i, out);
                }
            }
            rows *= c.n;
            cur = next;
        }
        debug_assert_eq!(cur.len(), size);
        Ok(cur)
    }

    /// Sum over the whole grid of `self * other`.
    pub fn dot(&self, other: &TensorTrain) -> Result<f64> {
        if self.grid.counts() != other.grid.counts() {
            return Err(Error::Format("dot of trains on different grids".into()));
        }
        // m is r_a x r_b
        let mut m = vec![1.0];
        let mut rb_prev = 1;
        for (a, b) in self.cores.iter().zip(&other.cores) {
            let mut next = vec![0.0; a.r1 * b.r1];
            for i in 0..a.n {
                // t = m * B[:, i, :]  (a.r0 x b.r1)
                let mut t = vec![0.0; a.r0 * b.r1];
                for p in 0..a.r0 {
                    let row = &m[p * rb_prev..(p + 1) * rb_prev];
                    b.left_mul(row, i, &mut t[p * b.r1..(p + 1) * b.r1]);
                }
                // next += A[:, i, :]^T * t
                for p in 0..a.r0 {
                    let trow = &t[p * b.r1..(p + 1) * b.r1];
                    for q in 0..a.r1 {
                        let g = a.at(p, i, q);
                        if g == 0.0 {
                            continue;
                        }
                        let out = &mut next[q * b.r1..(q + 1) * b.r1];
                        for (o, &tv) in out.iter_mut().zip(trow) {
                            *o += g * tv;
                        }
                    }
                }
            }
            m = next;
            rb_prev = b.r1;
        }
        Ok(m[0])
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).map(|v| v.max(0.0).sqrt()).unwrap_or(f64::NAN)
    }

    /// `||self - other||_F`, via inner products.
    pub fn distance(&self, other: &TensorTrain) -> Result<f64> {
        let aa = self.dot(self)?;
        let bb = other.dot(other)?;
        let ab = self.dot(other)?;
        Ok((aa - 2.0 * ab + bb).max(0.0).sqrt())
    }

    pub fn scaled(&self, s: f64) -> TensorTrain {
        let mut out = self.clone();
        out.cores[0].data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Parameter count.
    pub fn storage(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }
}
