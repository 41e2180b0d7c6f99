//! Seeded random streams.
//!
//! Every consumer of randomness derives its own ChaCha stream from a master
//! seed and a stream id, so adding draws in one place never shifts the draws
//! seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn substream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
