//! Seed handling.
//!
//! Every stochastic component draws from its own ChaCha stream. A stream is
//! identified by the global seed plus a 64-bit key, so components can be run
//! in any order (or concurrently) without perturbing each other's draws.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counter-based random stream owned by a single component.
pub type Stream = ChaCha8Rng;

/// Stream `key` under `seed`.
pub fn substream(seed: u64, key: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// FNV-1a hash of a label, used as a stream key.
pub fn label_key(label: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Stream keyed by a human-readable label such as a node id.
pub fn named_stream(seed: u64, label: &str) -> Stream {
    substream(seed, label_key(label))
}

/// A child seed for a labelled sub-component.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    named_stream(seed, label).next_u64()
}
