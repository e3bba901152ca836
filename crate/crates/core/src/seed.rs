//! Stable seed derivation. Every random stream in the crate is keyed by a
//! hash of its label so results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// 64-bit hash of length-prefixed parts (first 8 bytes of SHA-256, big endian).
pub fn stable_hash64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_be_bytes());
        h.update(p);
    }
    let out = h.finalize();
    u64::from_be_bytes(out[..8].try_into().expect("sha256 yields 32 bytes"))
}

pub fn sub_seed(seed: u64, label: &str, index: u64) -> u64 {
    stable_hash64(&[&seed.to_be_bytes(), label.as_bytes(), &index.to_be_bytes()])
}

pub fn rng_for(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(seed, label, index))
}
