//! Tensor trains on uniform grids.

mod argmax;
mod cross;
mod dense;
mod grid;
pub mod io;
mod maxvol;
mod round;
mod train;

pub use argmax::{tt_argmax, DEFAULT_CANDIDATES};
pub use cross::{cross_indexed, tt_cross, CrossConfig, CrossOutput, CrossReport, CrossState};
pub use dense::DenseTable;
pub use grid::Grid;
pub use maxvol::{maxvol, MAXVOL_TOL};
pub use round::tt_round;
pub use train::{Core, TensorTrain};

/// Random train on `[0, 1]^d`, used by tests across the crate.
#[cfg(test)]
pub(crate) fn random_tt(counts: &[usize], ranks: &[usize], seed: u64) -> TensorTrain {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = counts.len();
    let grid = Grid::new(vec![0.0; d], vec![1.0; d], counts.to_vec()).unwrap();
    let cores = (0..d)
        .map(|k| {
            let (r0, r1) = (ranks[k], ranks[k + 1]);
            let data = (0..r0 * counts[k] * r1).map(|_| rng.random_range(-1.0..1.0)).collect();
            Core::new(r0, counts[k], r1, data).unwrap()
        })
        .collect();
    TensorTrain::new(cores, grid).unwrap()
}
