//! Deterministic RNG streams keyed by structured identifiers, so results do
//! not depend on worker count or evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a domain tag and a key path into a 64-bit stream seed.
pub fn derive(seed: u64, domain: &str, keys: &[u64]) -> u64 {
    let mut h = splitmix(seed);
    for b in domain.bytes() {
        h = splitmix(h ^ b as u64);
    }
    for &k in keys {
        h = splitmix(h ^ k);
    }
    h
}

pub fn stream(seed: u64, domain: &str, keys: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive(seed, domain, keys))
}
