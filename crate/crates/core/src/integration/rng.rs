//! Deterministic random streams. Work is cut into fixed-size chunks, each
//! drawing from its own ChaCha stream, so results do not depend on how many
//! workers run the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Samples per independent stream.
pub const CHUNK: u64 = 4096;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a seed for a named sub-computation.
pub fn mix_seed(seed: u64, label: u64) -> u64 {
    // SplitMix64 finalizer.
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sizes of the chunks covering `count` samples.
pub fn chunk_sizes(count: u64) -> impl Iterator<Item = (u64, u64)> {
    let chunks = count.div_ceil(CHUNK);
    (0..chunks).map(move |c| (c, CHUNK.min(count - c * CHUNK)))
}
