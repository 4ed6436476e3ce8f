//! Seeded pseudo-random numbers for trace generation and simulation.
//!
//! The generator is SplitMix64: a 64-bit Weyl sequence (state advanced by a
//! fixed odd constant) passed through a fixed mixing function. It is tiny,
//! fully specified by the constants below and trivial to port, so generated
//! traces and simulation runs can be reproduced outside this crate.
//!
//! Independent streams are derived with [`SplitMix64::stream`], which mixes a
//! stream identifier (for example a link index) into the seed.

/// Name recorded in trace metadata so readers know how a file was produced.
pub const ALGORITHM: &str = "splitmix64-v1";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_MUL_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_MUL_2: u64 = 0x94D0_49BB_1331_11EB;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_MUL_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_MUL_2);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Stream `id` of `seed`: seeded with `mix64(seed ^ mix64(id + 1))`.
    pub fn stream(seed: u64, id: u64) -> Self {
        Self::new(mix64(seed ^ mix64(id.wrapping_add(1))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform integer in `[0, n)` by multiply-high (`(x * n) >> 64`).
    ///
    /// # Panics
    /// If `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        lo + self.below((hi - lo) as u64 + 1) as i64
    }

    /// Uniform float in `[0, 1)` from the top 53 bits.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
