//! Seeding and block-structured random streams.
//!
//! Draws are grouped into fixed-size blocks; block `b` of a stream seeded with
//! `s` is produced by ChaCha8 keyed by `s` on stream `b`. Any partition of the
//! blocks across workers therefore yields the same draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of draws per block.
pub const BLOCK_LEN: usize = 4096;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed from a master seed and a list of counters.
pub fn derive_seed(master: u64, counters: &[u64]) -> u64 {
    counters
        .iter()
        .fold(splitmix64(master), |acc, &c| splitmix64(acc ^ splitmix64(c.wrapping_add(0xA5A5))))
}

pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

pub fn block_count(count: usize) -> usize {
    count.div_ceil(BLOCK_LEN)
}

/// Range of draw indices covered by `block`.
pub fn block_range(count: usize, block: usize) -> std::ops::Range<usize> {
    let start = block * BLOCK_LEN;
    start..(start + BLOCK_LEN).min(count)
}
