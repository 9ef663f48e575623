//! Dominant-submatrix row selection.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Stop swapping once every coefficient is within `1 + MAXVOL_TOL` in magnitude.
pub const MAXVOL_TOL: f64 = 1e-2;

/// Pick `r` rows of the tall matrix `a` (m x r) whose square submatrix has
/// locally maximal volume. Returns the rows and `B = a * a[rows]^-1`, which is
/// the identity on those rows and bounded by `1 + tol` elsewhere.
pub fn maxvol(a: &DMatrix<f64>, tol: f64, max_swaps: usize) -> Result<(Vec<usize>, DMatrix<f64>)> {
    let (m, r) = a.shape();
    if r == 0 || m < r {
        return Err(Error::Numeric(format!("maxvol needs a tall matrix, got {m}x{r}")));
    }
    let rows = lu_rows(a)?;
    let b = right_solve(a, &rows)?;
    maxvol_refine(b, rows, tol, max_swaps)
}

/// Swap phase of maxvol, starting from `b` with `b[rows] = I`.
pub fn maxvol_refine(
    mut b: DMatrix<f64>,
    mut rows: Vec<usize>,
    tol: f64,
    max_swaps: usize,
) -> Result<(Vec<usize>, DMatrix<f64>)> {
    let (m, r) = b.shape();
    for _ in 0..max_swaps {
        let (mut bi, mut bj, mut best) = (0, 0, 0.0f64);
        for j in 0..r {
            for i in 0..m {
                let v = b[(i, j)].abs();
                if v > best {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        if best <= 1.0 + tol {
            break;
        }
        let piv = b[(bi, bj)];
        let col = b.column(bj).clone_owned();
        let mut row = b.row(bi).clone_owned();
        row[bj] -= 1.0;
        for j in 0..r {
            let f = row[j] / piv;
            if f == 0.0 {
                continue;
            }
            for i in 0..m {
                b[(i, j)] -= col[i] * f;
            }
        }
        rows[bj] = bi;
    }
    Ok((rows, b))
}

/// Rows chosen by Gaussian elimination with partial pivoting.
fn lu_rows(a: &DMatrix<f64>) -> Result<Vec<usize>> {
    let (m, r) = a.shape();
    let mut w = a.clone();
    let mut used = vec![false; m];
    let mut rows = Vec::with_capacity(r);
    let scale = a.amax();
    for j in 0..r {
        let mut p = usize::MAX;
        let mut best = 0.0f64;
        for i in 0..m {
            if !used[i] && w[(i, j)].abs() > best {
                best = w[(i, j)].abs();
                p = i;
            }
        }
        if p == usize::MAX || best <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Numeric("maxvol input is rank deficient".into()));
        }
        used[p] = true;
        rows.push(p);
        let piv = w[(p, j)];
        for i in 0..m {
            if used[i] {
                continue;
            }
            let f = w[(i, j)] / piv;
            if f == 0.0 {
                continue;
            }
            for jj in j..r {
                let v = w[(p, jj)];
                w[(i, jj)] -= f * v;
            }
        }
    }
    Ok(rows)
}

/// `a * a[rows]^-1`.
pub(crate) fn right_solve(a: &DMatrix<f64>, rows: &[usize]) -> Result<DMatrix<f64>> {
    let s = a.select_rows(rows);
    // X s = a  <=>  s^T X^T = a^T
    let lu = s.transpose().lu();
    lu.solve(&a.transpose())
        .map(|xt| xt.transpose())
        .ok_or_else(|| Error::Numeric("singular pivot submatrix".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coefficients_bounded_and_identity_on_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DMatrix::from_fn(40, 5, |_, _| rng.random_range(-1.0..1.0));
        let (rows, b) = maxvol(&a, MAXVOL_TOL, 200).unwrap();
        assert!(b.amax() <= 1.0 + MAXVOL_TOL + 1e-9);
        for (j, &i) in rows.iter().enumerate() {
            for jj in 0..5 {
                let want = if jj == j { 1.0 } else { 0.0 };
                assert!((b[(i, jj)] - want).abs() < 1e-9);
            }
        }
        // b reproduces a from its selected rows
        let back = &b * a.select_rows(&rows);
        assert!((back - &a).amax() < 1e-9);
    }

    #[test]
    fn volume_not_smaller_than_lu_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DMatrix::from_fn(30, 4, |_, _| rng.random_range(-1.0..1.0));
        let start = lu_rows(&a).unwrap();
        let (rows, _) = maxvol(&a, MAXVOL_TOL, 200).unwrap();
        let v0 = a.select_rows(&start).determinant().abs();
        let v1 = a.select_rows(&rows).determinant().abs();
        assert!(v1 >= v0 * (1.0 - 1e-12));
    }

    #[test]
    fn rank_deficient_is_reported() {
        let a = DMatrix::from_fn(6, 2, |i, _| i as f64);
        assert!(maxvol(&a, MAXVOL_TOL, 10).is_err());
    }
}
