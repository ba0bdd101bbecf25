//! Seeding contract.
//!
//! Every stochastic routine takes a `u64` seed and builds its own
//! [`ChaCha8Rng`]. Sub-streams (replicates, field components, uniforms)
//! derive their seeds with [`split_seed`], a counter-based SplitMix64
//! derivation: `split_seed(root, i)` depends only on `(root, i)`, so the
//! order in which replicates are scheduled never changes their output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sub-stream `stream` under `root`.
pub fn split_seed(root: u64, stream: u64) -> u64 {
    splitmix64(root ^ splitmix64(stream.wrapping_mul(GOLDEN).wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Well-known sub-stream indices shared by the simulators.
pub mod streams {
    pub const BASE: u64 = 0;
    pub const SELECTION: u64 = 1;
    pub const UNIFORMS: u64 = 2;
    pub const FIELD: u64 = 3;
    pub const MCMC: u64 = 4;
    pub const REPLICATE: u64 = 1 << 32;
}

/// Seed for replicate `index` of a study or envelope run.
pub fn replicate_seed(root: u64, index: u64) -> u64 {
    split_seed(root, streams::REPLICATE + index)
}
