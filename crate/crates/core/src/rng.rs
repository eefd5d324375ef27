//! Named, seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A generator for stream `name` under a root seed. Distinct names give
/// independent streams; the same `(seed, name, index)` always gives the
/// same generator.
pub fn stream(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    // FNV-1a over the name, mixed with the seed and index
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&h.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
