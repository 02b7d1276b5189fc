//! Seeded random streams.
//!
//! Every consumer of randomness draws from a ChaCha8 stream selected by
//! `(seed, stream id)`, so results never depend on which thread or process
//! ran the computation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::Matrix;

pub type StreamRng = ChaCha8Rng;

/// Stream reserved for parameter initialization.
pub const INIT_STREAM: u64 = 0;
/// Training streams start here; node `i` trains on `TRAIN_STREAM_BASE + i`.
pub const TRAIN_STREAM_BASE: u64 = 1;
/// Sample generation gets its own stream so it never perturbs training.
pub const GENERATE_STREAM: u64 = 0xFFFF_0000;

pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Standard-normal matrix, filled row by row.
pub fn gaussian_matrix(rng: &mut StreamRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Uniformly random permutation of `0..n`.
pub fn permutation(rng: &mut StreamRng, n: usize) -> alloc::vec::Vec<usize> {
    let mut idx: alloc::vec::Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}
