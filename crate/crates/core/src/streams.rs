//! Seeded uniform streams and the multi-way pool distribution.

use alloc::vec;
use alloc::vec::Vec;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::params::seg_index;

/// A 64-bit stream seed. Identical seeds give bit-identical streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Seed(pub u64);

impl Seed {
    /// Parses a decimal or `0x`-prefixed hexadecimal seed.
    pub fn parse(s: &str) -> Result<Seed> {
        let s = s.trim();
        let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
            Some(hex) => u64::from_str_radix(hex, 16),
            None => s.parse::<u64>(),
        };
        parsed.map(Seed).map_err(|_| Error::InvalidParams("seed must be a decimal or 0x-hex u64"))
    }

    /// Derives an independent child seed, e.g. for a secondary stream that
    /// must not overlap with the primary input.
    pub fn derive(self, salt: u64) -> Seed {
        let mut z = self.0 ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        Seed(z ^ (z >> 31))
    }
}

/// Generator of i.i.d. uniform values on `[0, 1)` with 53 random bits each.
#[derive(Debug, Clone)]
pub struct UniformSource {
    rng: Xoshiro256PlusPlus,
}

impl UniformSource {
    pub fn new(seed: Seed) -> Self {
        UniformSource {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed.0),
        }
    }

    #[inline]
    pub fn next_value(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`.
    #[inline]
    pub fn next_below(&mut self, bound: u64) -> u64 {
        // Lemire's multiply-shift; the bias is below 2^-32 for the bounds
        // used here and irrelevant to the statistics built on top.
        ((self.rng.next_u64() as u128 * bound as u128) >> 64) as u64
    }
}

impl Iterator for UniformSource {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_value())
    }
}

pub fn uniform_stream(seed: Seed, n: usize) -> Vec<f64> {
    UniformSource::new(seed).take(n).collect()
}

/// Parameters `(n, B, m)` of the multi-way pool distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolDistParams {
    pub n: u64,
    pub b: u64,
    pub m: u64,
}

impl PoolDistParams {
    pub fn new(n: u64, b: u64, m: u64) -> Result<Self> {
        if b == 0 {
            return Err(Error::InvalidParams("pool distribution needs B >= 1"));
        }
        if b.checked_mul(m).is_none_or(|bm| bm > n) {
            return Err(Error::InvalidParams("pool distribution needs n - B*m >= 0"));
        }
        Ok(PoolDistParams { n, b, m })
    }

    pub fn output_len(&self) -> u64 {
        self.n - self.b * self.m
    }
}

/// One draw from the pool distribution.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoolSample {
    /// Items that entered the pool, truncated at `n - B*m`.
    pub y: Vec<f64>,
    /// The first `min(m, count)` arrivals of every segment, in arrival order.
    pub absorbed: Vec<f64>,
    /// Some segment received fewer than `m` of the `n` draws. The excess
    /// qualifying items of the other segments are then cut off by the
    /// truncation, so `|absorbed| + |y| < n`.
    pub underflow: bool,
}

/// Runs the generator over explicit draws `x`.
pub fn pool_dist_from_draws(x: &[f64], p: PoolDistParams) -> PoolSample {
    let target = p.output_len() as usize;
    let mut seen = vec![0u64; p.b as usize];
    let mut out = PoolSample {
        y: Vec::with_capacity(target),
        absorbed: Vec::with_capacity(x.len().saturating_sub(target)),
        underflow: false,
    };
    for &v in x {
        let s = seg_index(v, p.b) as usize;
        if seen[s] >= p.m {
            if out.y.len() < target {
                out.y.push(v);
            }
        } else {
            out.absorbed.push(v);
        }
        seen[s] += 1;
    }
    out.underflow = seen.iter().any(|&c| c < p.m);
    out
}

pub fn pool_dist_sample_traced(seed: Seed, p: PoolDistParams) -> PoolSample {
    pool_dist_from_draws(&uniform_stream(seed, p.n as usize), p)
}

/// The pool stream `y` and the underflow flag.
pub fn pool_dist_sample(seed: Seed, p: PoolDistParams) -> (Vec<f64>, bool) {
    let s = pool_dist_sample_traced(seed, p);
    (s.y, s.underflow)
}
