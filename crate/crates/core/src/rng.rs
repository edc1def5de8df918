//! Seeded, splittable random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by a
//! master seed, a label and an index, so independent consumers (runs,
//! datasets, rollouts) never share state and any one of them can be
//! regenerated on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for `(master, label, index)`.
pub fn substream(master: u64, label: &str, index: u64) -> Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(label.as_bytes()).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(b"vepm-rng");
    ChaCha8Rng::from_seed(key)
}

/// Derived 64-bit seed, for APIs that take a plain seed.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    use rand::RngCore;
    substream(master, label, index).next_u64()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
