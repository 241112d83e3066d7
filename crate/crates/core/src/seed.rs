//! Seed derivation for independent random streams.
//!
//! Every random stream in the crate is addressed by a master seed and a path
//! of integer labels. The mixing function is frozen: changing it changes every
//! published result.
//!
//! ```text
//! state_0     = mix(master ^ PATH_KEY)
//! state_{i+1} = mix(state_i ^ mix(label_i + (i + 1) * GOLDEN))
//! ```
//!
//! `mix` is the SplitMix64 finalizer, which is a bijection on `u64`. For a
//! fixed master and prefix, distinct final labels therefore give distinct
//! seeds, and the position term makes the result order sensitive.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const PATH_KEY: u64 = 0x243F_6A88_85A3_08D3;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of the stream addressed by `labels` under `master`.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .enumerate()
        .fold(mix(master ^ PATH_KEY), |state, (i, &label)| {
            let position = (i as u64 + 1).wrapping_mul(GOLDEN);
            mix(state ^ mix(label.wrapping_add(position)))
        })
}

/// A ChaCha8 generator for the stream addressed by `labels`.
pub fn stream_rng(master: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, labels))
}

/// Stream labels used by the experiment kernels. Values are frozen.
pub mod label {
    pub const SIGMA: u64 = 1;
    pub const SIGMA_N: u64 = 2;
    pub const WALK: u64 = 3;
    pub const TRANSLATE: u64 = 4;
    pub const HAAR: u64 = 5;
    pub const KHINTCHINE: u64 = 6;
    pub const VARIANCE: u64 = 7;
    pub const IDENTITY: u64 = 8;
    pub const POSITIVIZE: u64 = 9;
}
