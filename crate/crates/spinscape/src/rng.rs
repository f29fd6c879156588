//! Seeded random streams.
//!
//! All randomness comes from ChaCha8, a counter-based generator. A run gets
//! its own stream: the key is derived from the experiment seed and the
//! 64-bit stream id is the run index, so runs are independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for a single-purpose draw (graph, disorder).
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for run `run` of an experiment with master seed `seed`.
pub fn stream(seed: u64, run: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// A 64-bit seed for sub-experiment `k`, drawn from stream `(seed, k)`.
pub fn derive(seed: u64, k: u64) -> u64 {
    use rand::Rng as _;
    stream(seed, k).random()
}
