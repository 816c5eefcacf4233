//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own stream, derived from the
//! run seed and a purpose label: the ChaCha8 key is the seed, the 64-bit
//! stream id is the FNV-1a hash of the label. Streams are counter-based, so
//! adding a consumer never shifts the values another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// The generator for `purpose` under run seed `seed`.
pub fn stream(seed: u64, purpose: &str) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a64(purpose.as_bytes()));
    rng
}
