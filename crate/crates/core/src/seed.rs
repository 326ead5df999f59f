//! Stable 64-bit seed derivation.
//!
//! Every stochastic component draws from a stream whose seed is derived from
//! the run seed plus a stream name and an index, so components never share or
//! perturb each other's randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// First 8 bytes (little-endian) of SHA-256 over the length-prefixed parts.
pub fn hash64(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Seed of the named stream `name[index]` under `base`.
pub fn stream_seed(base: u64, name: &str, index: u64) -> u64 {
    hash64(&[&base.to_le_bytes(), name.as_bytes(), &index.to_le_bytes()])
}

pub fn stream_rng(base: u64, name: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(base, name, index))
}
