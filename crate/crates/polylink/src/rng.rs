//! Seed-stream derivation. Every stochastic component draws from its own
//! ChaCha8 stream derived from (master seed, tag), so stages can run in any
//! order — or in parallel — without perturbing each other's draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed tags, one per consumer, so streams never collide.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    NegativeSampling(u64),
    SplitShuffle(u64),
    ParamInit,
    EpochShuffle(u64),
    Corruption(u64),
    Synthetic(u64),
}

impl Stream {
    fn tag(self) -> (u64, u64) {
        match self {
            Stream::NegativeSampling(i) => (1, i),
            Stream::SplitShuffle(i) => (2, i),
            Stream::ParamInit => (3, 0),
            Stream::EpochShuffle(i) => (4, i),
            Stream::Corruption(i) => (5, i),
            Stream::Synthetic(i) => (6, i),
        }
    }
}

/// Derive the stream for (seed, consumer). SplitMix64-style mixing keeps
/// nearby seeds and tags uncorrelated.
pub fn stream(seed: u64, s: Stream) -> ChaCha8Rng {
    let (a, b) = s.tag();
    let mut x = seed;
    for w in [a, b] {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(w);
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
    }
    ChaCha8Rng::seed_from_u64(x)
}
