//! Seeded random streams.
//!
//! Every stochastic component takes a [`SimRng`]. Independent streams for
//! parallel trajectories or Monte-Carlo fan-out come from [`substream`], which
//! keeps the master seed and selects a distinct ChaCha stream id, so no state
//! is shared between workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Stream `index` of the family rooted at `seed`.
pub fn substream(seed: u64, index: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    // stream 0 is the plain seeded generator
    rng.set_stream(index + 1);
    rng
}
