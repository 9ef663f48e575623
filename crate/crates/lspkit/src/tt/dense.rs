use super::{Grid, TensorTrain};
use crate::{Error, Result};

/// Full table of node values, row-major with the last index fastest.
///
/// A fast lookup path for small grids; interpolation touches only the
/// dimensions where the point is strictly between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTable {
    grid: Grid,
    strides: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTable {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let size = grid.size().ok_or_else(|| Error::Config("grid too large".into()))?;
        if size != values.len() as u128 {
            return Err(Error::Format(format!("{} values for {size} nodes", values.len())));
        }
        let counts = grid.counts();
        let mut strides = vec![1usize; counts.len()];
        for k in (0..counts.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * counts[k + 1];
        }
        Ok(Self { grid, strides, values })
    }

    pub fn from_tt(tt: &TensorTrain) -> Result<Self> {
        Self::new(tt.grid().clone(), tt.to_dense()?)
    }

    pub fn tabulate(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let size = grid
            .size()
            .filter(|&s| s <= 1 << 28)
            .ok_or_else(|| Error::Config("grid too large to tabulate".into()))? as usize;
        let counts = grid.counts().to_vec();
        let mut idx = vec![0usize; counts.len()];
        let mut p = vec![0.0; counts.len()];
        let mut values = Vec::with_capacity(size);
        for _ in 0..size {
            grid.point_into(&idx, &mut p);
            values.push(f(&p));
            for k in (0..counts.len()).rev() {
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn at(&self, index: &[usize]) -> f64 {
        self.values[self.offset(index)]
    }

    pub fn interpolate(&self, point: &[f64]) -> Result<f64> {
        let d = self.grid.dim();
        if point.len() != d {
            return Err(Error::Format(format!("point of length {} for {d} dimensions", point.len())));
        }
        let mut base = 0usize;
        let mut active: [(usize, f64); 16] = [(0, 0.0); 16];
        let mut na = 0;
        for (k, &x) in point.iter().enumerate() {
            let (i, t) = self.grid.locate(k, x)?;
            if t == 0.0 {
                base += i * self.strides[k];
            } else if t == 1.0 {
                base += (i + 1) * self.strides[k];
            } else {
                base += i * self.strides[k];
                if na == active.len() {
                    return Err(Error::Config("too many interpolated dimensions".into()));
                }
                active[na] = (self.strides[k], t);
                na += 1;
            }
        }
        let mut total = 0.0;
        for corner in 0..(1usize << na) {
            let mut w = 1.0;
            let mut off = base;
            for (b, &(s, t)) in active[..na].iter().enumerate() {
                if corner >> b & 1 == 1 {
                    w *= t;
                    off += s;
                } else {
                    w *= 1.0 - t;
                }
            }
            total += w * self.values[off];
        }
        Ok(total)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
