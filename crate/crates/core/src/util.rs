//! Deterministic seed derivation.
//!
//! All randomness flows from one top-level seed. Sub-streams are named so
//! that adding a consumer never shifts the draws of another: each (stream,
//! index) pair hashes to an independent ChaCha seed via FNV-1a, which is
//! stable across platforms and releases.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    let mut h = state;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Collapse (master seed, stream name, index) into a single 64-bit seed.
pub fn derive_seed(master: u64, stream: &str, index: u64) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &master.to_le_bytes());
    h = fnv1a(h, stream.as_bytes());
    fnv1a(h, &index.to_le_bytes())
}

/// RNG for the named sub-stream of a master seed.
pub fn stream_rng(master: u64, stream: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}
