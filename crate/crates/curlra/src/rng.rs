//! Seeded, stream-splittable randomness. Every randomized operation takes an
//! explicit generator; identical (seed, stream) pairs reproduce results
//! bit-for-bit, and parallel trials own disjoint streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for a (seed, stream) pair. Streams are independent; a trial at
/// index `t` conventionally owns streams derived from `t`.
pub fn stream(seed: u64, stream_id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Convenience for single-stream use.
pub fn seeded(seed: u64) -> Rng {
    stream(seed, 0)
}
