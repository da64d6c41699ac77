//! Deterministic random-number plumbing.
//!
//! All stochastic pieces of the crate draw from [`ChaCha8Rng`] streams derived
//! from explicit integer seeds. Independent concerns (cold-start draws,
//! candidate generation, forest bootstraps, …) get their own streams via
//! [`substream`], keyed by a purpose tag and an iteration index. Because
//! every stream is derived rather than shared, truncating a run at iteration
//! `t` reproduces exactly the first `t` iterations of a longer run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mixes a seed with a tag into a new 64-bit seed (SplitMix64 finalizer).
///
/// The finalizer's avalanche behaviour makes neighbouring `(seed, tag)`
/// pairs produce unrelated outputs, so derived streams do not overlap in
/// practice.
pub fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A fresh generator seeded from `mix(seed, tag)`.
pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, tag))
}

/// A fresh generator for purpose `tag` at iteration `index`.
pub fn substream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed, tag, index))
}

/// The derived 64-bit seed behind [`substream`], for components that seed
/// themselves.
pub fn substream_seed(seed: u64, tag: u64, index: u64) -> u64 {
    mix(mix(seed, tag), index)
}

/// One standard-normal draw via the Box–Muller transform.
///
/// Uses two uniform draws per sample and keeps no cached state, so a stream's
/// output depends only on how many values were drawn from it.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Map [0, 1) to (0, 1] so the logarithm is finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
