//! Seeded RNG streams.
//!
//! Everything stochastic in this crate runs off ChaCha8 streams derived from a
//! single master seed: stream `k` of seed `s` is `ChaCha8Rng::seed_from_u64(s)`
//! with `set_stream(k)`. Distinct streams are independent by construction, so
//! parallel consumers (sampler chains, benchmark replications) produce output
//! that does not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The concrete RNG used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// RNG for substream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
