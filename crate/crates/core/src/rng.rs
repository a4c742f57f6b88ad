//! Counter-based random streams.
//!
//! Every replica of an ensemble draws from its own ChaCha stream selected by
//! the replica index, so the numbers a replica sees depend only on
//! `(seed, replica)` and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream number `index` of the family keyed by `seed`.
pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stream reserved for auxiliary draws that are not tied to a replica.
pub fn auxiliary(seed: u64) -> Stream {
    stream(seed, u64::MAX)
}
