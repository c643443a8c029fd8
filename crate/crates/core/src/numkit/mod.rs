//! Numerical substrate: dense arrays, a small MLP with reverse-mode gradients,
//! Adam, and checkpoints.

mod adam;
mod array;
pub mod checkpoint;
mod loss;
mod mlp;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use adam::{clip_global_norm, AdamState};
pub use array::{axpy, dot, norm, DenseArray};
pub use loss::{grad_params, loss_value, Expr};
pub use mlp::{Activation, BatchTape, Mlp, Tape, ROW_CHUNK};

/// Random generator used by every stochastic routine.
pub type Rng64 = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` standard normal draws.
pub fn standard_normals<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}
