use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform rectangular grid, endpoints inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
}

impl Grid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::Config("grid needs at least one dimension".into()));
        }
        if lower.len() != upper.len() || lower.len() != counts.len() {
            return Err(Error::Config("grid bound/count lengths differ".into()));
        }
        for k in 0..lower.len() {
            if !(lower[k].is_finite() && upper[k].is_finite() && lower[k] < upper[k]) {
                return Err(Error::Config(format!(
                    "grid dimension {k}: need finite lower < upper, got [{}, {}]",
                    lower[k], upper[k]
                )));
            }
            if counts[k] < 2 {
                return Err(Error::Config(format!("grid dimension {k}: count {} < 2", counts[k])));
            }
        }
        Ok(Self { lower, upper, counts })
    }

    pub fn uniform(dim: usize, lower: f64, upper: f64, count: usize) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim], vec![count; dim])
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Total number of nodes, `None` on overflow.
    pub fn size(&self) -> Option<u128> {
        self.counts
            .iter()
            .try_fold(1u128, |acc, &n| acc.checked_mul(n as u128))
    }

    pub fn spacing(&self, k: usize) -> f64 {
        (self.upper[k] - self.lower[k]) / (self.counts[k] - 1) as f64
    }

    pub fn coord(&self, k: usize, i: usize) -> f64 {
        if i + 1 == self.counts[k] {
            self.upper[k]
        } else {
            self.lower[k] + i as f64 * self.spacing(k)
        }
    }

    pub fn point(&self, index: &[usize]) -> Vec<f64> {
        index.iter().enumerate().map(|(k, &i)| self.coord(k, i)).collect()
    }

    pub fn point_into(&self, index: &[usize], out: &mut [f64]) {
        for (k, &i) in index.iter().enumerate() {
            out[k] = self.coord(k, i);
        }
    }

    /// Nearest node index in dimension `k` (clamped).
    pub fn nearest(&self, k: usize, x: f64) -> usize {
        let t = ((x - self.lower[k]) / self.spacing(k)).round();
        t.clamp(0.0, (self.counts[k] - 1) as f64) as usize
    }

    /// Cell containing `x` in dimension `k`: left node and weight of the right node.
    ///
    /// Points within a relative 1e-12 of the box are snapped inside.
    pub fn locate(&self, k: usize, x: f64) -> Result<(usize, f64)> {
        let (lo, hi) = (self.lower[k], self.upper[k]);
        let slack = 1e-12 * (hi - lo);
        if !(x >= lo - slack && x <= hi + slack) {
            return Err(Error::Domain { dim: k, value: x, lower: lo, upper: hi });
        }
        let n = self.counts[k];
        let s = ((x - lo) / self.spacing(k)).clamp(0.0, (n - 1) as f64);
        let mut i = s.floor() as usize;
        if i >= n - 1 {
            i = n - 2;
        }
        let mut t = s - i as f64;
        // snap float noise so node coordinates hit nodes exactly
        if t < 1e-12 {
            t = 0.0;
        } else if t > 1.0 - 1e-12 {
            if i + 2 < n {
                i += 1;
                t = 0.0;
            } else {
                t = 1.0;
            }
        }
        Ok((i, t))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(k, &v)| v >= self.lower[k] && v <= self.upper[k])
    }
}
