//! Counter-based random number generation.
//!
//! Every random quantity in the model is a pure function of a `(key, seed)`
//! pair. There is no generator state, so evaluation order, threading, and
//! partial evaluation cannot change any drawn value. That property is what
//! makes sweeps safe to shard across threads and lets hot paths skip draws
//! that provably cannot change an outcome.

use std::f64::consts::PI;

/// Hard bound, in standard deviations, on the magnitude any
/// [`standard_normal`] draw can reach.
///
/// The Box-Muller radius is maximised when the uniform input takes its
/// smallest value of 2^-53, giving sqrt(2 * 53 * ln 2) = 8.5719... Callers
/// may treat `|z| <= MAX_NORMAL_SIGMA` as exact, not probabilistic, and use
/// it to skip draws whose outcome cannot matter.
pub const MAX_NORMAL_SIGMA: f64 = 8.58;

/// 64-bit finalizer with full avalanche (the SplitMix64 mixer).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Two independent-looking 64-bit words derived from a key and a seed.
#[inline]
fn two_words(key: u64, seed: u64) -> (u64, u64) {
    let a = mix64(key ^ mix64(seed ^ 0x9e37_79b9_7f4a_7c15));
    let b = mix64(a ^ 0xd134_2543_de82_ef95);
    (a, b)
}

/// Uniform draw in [0, 1) keyed on `(key, seed)`.
#[inline]
pub fn uniform(key: u64, seed: u64) -> f64 {
    let (a, _) = two_words(key, seed);
    (a >> 11) as f64 / (1u64 << 53) as f64
}

/// Standard normal draw keyed on `(key, seed)`.
///
/// Box-Muller over two keyed uniforms. All transcendental calls go through
/// `libm` so results are bit-identical across platforms and toolchains.
#[inline]
pub fn standard_normal(key: u64, seed: u64) -> f64 {
    let (a, b) = two_words(key, seed);
    // u1 in (0, 1] so the logarithm is finite; u2 in [0, 1).
    let u1 = ((a >> 11) + 1) as f64 / (1u64 << 53) as f64;
    let u2 = (b >> 11) as f64 / (1u64 << 53) as f64;
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
}

/// Uniform integer draw in `[0, bound)` keyed on `(key, seed)`.
pub fn uniform_index(key: u64, seed: u64, bound: usize) -> usize {
    assert!(bound > 0, "uniform_index needs a non-empty range");
    // Widening multiply maps the 64-bit word onto [0, bound) without bias
    // worth caring about at the bounds used here (all << 2^32).
    let (a, _) = two_words(key, seed);
    (((a as u128) * (bound as u128)) >> 64) as usize
}

/// Fisher-Yates shuffle of `0..n` keyed on `(key, seed)`.
pub fn keyed_permutation(n: usize, key: u64, seed: u64) -> Vec<usize> {
    let mut out: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = uniform_index(key.wrapping_add(i as u64), seed, i + 1);
        out.swap(i, j);
    }
    out
}
