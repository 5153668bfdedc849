//! Counter-based seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a seed
//! obtained from a parent seed and a stream label through the SplitMix64
//! finaliser. Derived seeds depend only on `(parent, label)`, never on the
//! order in which streams are requested, so replications can be scheduled
//! on any number of threads and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for numbered stream `stream` of `seed`.
pub fn derive(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream.wrapping_mul(GOLDEN).wrapping_add(1)))
}

/// Child seed for a named stream (FNV-1a of the label, then [`derive`]).
pub fn derive_tagged(seed: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    derive(seed, h)
}

/// Seed of replication `rep` in an experiment with base seed `base`.
pub fn rep_seed(base: u64, rep: u64) -> u64 {
    derive(derive_tagged(base, "rep"), rep)
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
