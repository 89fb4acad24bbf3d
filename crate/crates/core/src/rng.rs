//! SplitMix64 pseudo-random generator with fully specified derived draws.
//!
//! The stream is fully specified so that scenarios and seeded selections
//! reproduce bit-for-bit on any platform or reimplementation:
//!
//! ```text
//! state  <- state + 0x9E3779B97F4A7C15
//! z      <- state
//! z      <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z      <- (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output <- z ^ (z >> 31)
//! ```
//!
//! Uniform doubles take the top 53 bits of one output. Bounded integers use
//! rejection on the widening product to stay unbiased.

use rand_xoshiro::rand_core::{Rng, SeedableRng};

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    inner: rand_xoshiro::SplitMix64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { inner: rand_xoshiro::SplitMix64::seed_from_u64(seed) }
    }

    /// Derives an independent stream from a base seed and a list of labels:
    /// each label is whitened by one draw and mixed into the seed by another.
    pub fn derive(seed: u64, labels: &[u64]) -> Self {
        let mut s = seed;
        for &label in labels {
            s = Self::new(s ^ Self::new(label).next_u64()).next_u64();
        }
        Self::new(s)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Standard normal via Box-Muller (one draw per call, second discarded).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Samples `k` distinct elements of `pool` without replacement using a
    /// partial Fisher-Yates shuffle. Order of the output is the draw order.
    pub fn sample<T: Copy>(&mut self, pool: &[T], k: usize) -> Vec<T> {
        let mut items = pool.to_vec();
        let k = k.min(items.len());
        for i in 0..k {
            let j = i + self.below((items.len() - i) as u64) as usize;
            items.swap(i, j);
        }
        items.truncate(k);
        items
    }
}
