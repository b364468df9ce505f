//! Counter-based random streams keyed by `(seed, path, block)`.
//!
//! Each key selects a ChaCha8 stream (`path`) and a word offset (`block`),
//! so any block of any path can be regenerated independently of the order in
//! which paths are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved per block: 2^40, far beyond what one block consumes.
const BLOCK_STRIDE_BITS: u32 = 40;

/// Stream ids at and above this value are reserved for scenario-level draws.
pub const RESERVED_STREAMS: u64 = 1 << 63;
pub(crate) const SIGMA0_STREAM: u64 = RESERVED_STREAMS;
pub(crate) const WISHART_STREAM: u64 = RESERVED_STREAMS + 1;
pub(crate) const PILOT_STREAM_BASE: u64 = RESERVED_STREAMS + 2;

/// Deterministic generator for one `(seed, path, block)` key.
pub fn stream_rng(seed: u64, path: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng.set_word_pos(u128::from(block) << BLOCK_STRIDE_BITS);
    rng
}
