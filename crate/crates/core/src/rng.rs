//! Counter-derived random substreams.
//!
//! Every sampling site in the crate owns a stream derived from
//! `(seed, label, a, b)`. The tuple is embedded directly into a 256-bit
//! ChaCha key, so distinct tuples yield statistically independent streams
//! and a result never depends on how work is ordered or parallelized —
//! sample `j` of a Monte-Carlo run, or worker `i` in round `r`, always sees
//! the same draws.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream label: per-worker gradient noise / mini-batch sampling.
pub const STREAM_GRAD: u64 = 1;
/// Stream label: per-worker compute-time draws.
pub const STREAM_DELAY: u64 = 2;
/// Stream label: Monte-Carlo runtime estimation (one substream per sample).
pub const STREAM_MC: u64 = 3;
/// Stream label: synthetic dataset generation.
pub const STREAM_DATA: u64 = 4;
/// Stream label: model initialization.
pub const STREAM_INIT: u64 = 5;

/// Derives an independent generator from `(seed, label, a, b)`.
pub fn substream(seed: u64, label: u64, a: u64, b: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&label.to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha12Rng::from_seed(key)
}
