//! Counter-based random streams.
//!
//! Replica `r` of a run seeded with `seed` always draws from ChaCha8 stream
//! `r`, so its output does not depend on how replicas are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
