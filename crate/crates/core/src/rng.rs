//! Seeded random stream used for data generation and splitting.
//!
//! Algorithm (version 1):
//! - generator: xoshiro256++ whose state is filled from the 64-bit seed with
//!   SplitMix64 (the `rand_xoshiro` `seed_from_u64` expansion);
//! - uniform on `[0, 1)`: `(next_u64 >> 11) * 2^-53`;
//! - standard normal: Box-Muller cosine branch, `sqrt(-2 ln(1 - u1)) *
//!   cos(2 pi u2)`, consuming two uniforms per draw;
//! - integer below `k`: rejection on `next_u64` against the largest multiple
//!   of `k`, then `x % k`;
//! - `k` of `n` without replacement: partial Fisher-Yates over `0..n`.
//!
//! Everything here is deterministic given the seed, so any implementation of
//! the same steps reproduces the same streams.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub const STREAM_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct SeededStream(Xoshiro256PlusPlus);

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        SeededStream(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal(&mut self, sd: f64) -> f64 {
        sd * self.standard_normal()
    }

    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let limit = u64::MAX - u64::MAX % bound;
        loop {
            let x = self.next_u64();
            if x < limit {
                return x % bound;
            }
        }
    }

    /// `k` distinct indices from `0..n`, in selection order.
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

/// `floor(fraction * count)` with a guard against products like
/// `0.29 * 100 = 28.999999999999996`.
pub(crate) fn floor_count(fraction: f64, count: usize) -> usize {
    (fraction * count as f64 + 1e-9).floor() as usize
}

/// `ceil(fraction * count)` with the same guard in the other direction.
pub(crate) fn ceil_count(fraction: f64, count: usize) -> usize {
    (fraction * count as f64 - 1e-9).ceil().max(0.0) as usize
}
