//! Seed streams.
//!
//! A run has one master seed. Every consumer asks for its own stream by
//! label; the stream seed is the first eight bytes (little endian) of
//! `SHA-256(master_le_bytes || label_utf8)`. Adding a new label never shifts
//! the values any existing label sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn stream(master: u64, label: &str) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, label))
}

/// 32 bytes of key material for `label`, used for deterministic key pairs.
pub fn key_material(master: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"key:");
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    h.finalize().into()
}

/// SplitMix64 finalizer; a stateless hash for pure noise functions.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a string together with a seed into a uniform value in `[0, 1)`.
pub fn unit_hash(seed: u64, key: &str) -> f64 {
    let mut acc = mix64(seed);
    for chunk in key.as_bytes().chunks(8) {
        let mut buf = [0u8; 8];
        buf[..chunk.len()].copy_from_slice(chunk);
        acc = mix64(acc ^ u64::from_le_bytes(buf));
    }
    acc = mix64(acc ^ key.len() as u64);
    (acc >> 11) as f64 / (1u64 << 53) as f64
}
