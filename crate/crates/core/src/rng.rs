//! Frozen pseudo-random number generation.
//!
//! The generator is SplitMix64: a 64-bit counter advanced by the golden-ratio
//! increment `0x9E3779B97F4A7C15` and whitened by the [`mix64`] finalizer.
//! Gaussian variates use the basic Box–Muller transform, one variate per call:
//!
//! ```text
//! u1 = ((next_u64 >> 11) + 1) * 2^-53    in (0, 1]
//! u2 = (next_u64 >> 11) * 2^-53          in [0, 1)
//! z  = sqrt(-2 ln u1) * cos(2 pi u2)
//! ```
//!
//! Independent streams are obtained by deriving seeds with [`derive_seed`],
//! never by sharing a generator between threads.

use std::f64::consts::PI;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const DERIVE_INIT: u64 = 0x243F_6A88_85A3_08D3;
const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes an ordered list of words into one seed:
/// `h = mix64(h ^ mix64(word + GAMMA * (position + 1)))`, starting from a fixed constant.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().enumerate().fold(DERIVE_INIT, |h, (i, &w)| {
        mix64(h ^ mix64(w.wrapping_add(GOLDEN_GAMMA.wrapping_mul(i as u64 + 1))))
    })
}

/// SplitMix64 state. A plain value: copying it forks an identical stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    state: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState { state: seed }
    }

    pub fn raw(&self) -> u64 {
        self.state
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * INV_2_53
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n` (`n > 0`), by multiply-shift.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal variate by Box–Muller.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * INV_2_53;
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    pub fn gaussian_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.gaussian()).collect()
    }

    /// Fisher–Yates shuffle of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            p.swap(i, j);
        }
        p
    }
}

/// Functional form of [`RngState::gaussian`].
pub fn rng_gaussian(state: RngState) -> (f64, RngState) {
    let mut s = state;
    let z = s.gaussian();
    (z, s)
}
