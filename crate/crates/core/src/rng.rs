//! Seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for `(seed, stream)`; distinct streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream rng for a sub-purpose of a stream, e.g. augmentation of sample `i` at epoch `e`.
pub fn substream_rng(seed: u64, stream: u64, salt: u64) -> ChaCha8Rng {
    let mixed = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    stream_rng(mixed, stream)
}
