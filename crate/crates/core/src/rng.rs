//! Seeded, splittable random streams.
//!
//! Every campaign has one seed. Instance `i` draws from a ChaCha8 stream keyed
//! by `derive_seed(seed, i)`, so results do not depend on how instances are
//! scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// One SplitMix64 output step.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Child seed for item `index` of a campaign.
pub fn derive_seed(campaign: u64, index: u64) -> u64 {
    splitmix64(splitmix64(campaign) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn stream(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Independent sub-stream for a named purpose within one instance.
pub fn substream(seed: u64, purpose: u64) -> Rng {
    stream(derive_seed(seed, purpose))
}
