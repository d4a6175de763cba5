//! Seed splitting.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded by
//! [`stream`], which mixes a top-level seed with a purpose tag and a list of
//! indices. Streams for different purposes are independent, so enabling an
//! attack never changes the swarm geometry or the honest measurement noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for the derived streams.
pub mod purpose {
    pub const GEOMETRY: &str = "geometry";
    pub const POSITION_NOISE: &str = "position-noise";
    pub const DISTANCE_NOISE: &str = "distance-noise";
    pub const SELECT: &str = "select-malicious";
    pub const FAKE_POSITIONS: &str = "fake-positions";
    pub const FABRICATION_NOISE: &str = "fabrication-noise";
    pub const BASELINE: &str = "baseline";
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the tag bytes.
fn tag_hash(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derives a child seed: `splitmix(seed ^ hash(tag))` folded with each index.
pub fn derive(seed: u64, tag: &str, indices: &[u64]) -> u64 {
    indices
        .iter()
        .fold(splitmix(seed ^ tag_hash(tag)), |acc, &i| splitmix(acc ^ splitmix(i)))
}

/// A deterministic generator for one purpose.
pub fn stream(seed: u64, tag: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag, indices))
}
