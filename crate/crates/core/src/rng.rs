//! Seeded random streams.
//!
//! Every consumer of randomness derives its own ChaCha8 stream from the root
//! seed plus a list of tags (e.g. `[SAMPLER, layer, class]`). ChaCha is
//! counter based, so distinct streams are independent and a stream's output
//! does not depend on which thread draws from it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream namespaces.
pub mod tag {
    pub const SAMPLER: u64 = 0x5341_4d50;
    pub const LABELS: u64 = 0x4c41_4245;
    pub const GW_TREE: u64 = 0x4757_5452;
    pub const SPECTRAL_START: u64 = 0x5354_5254;
    pub const ROUNDING: u64 = 0x524f_554e;
    pub const PROBES: u64 = 0x5052_4f42;
    pub const WEIGHTS: u64 = 0x5745_4947;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, tags)`.
pub fn substream(seed: u64, tags: &[u64]) -> StreamRng {
    let mut h = splitmix64(seed);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x6a09_e667_f3bc_c908));
    rng.set_stream(h);
    rng
}
