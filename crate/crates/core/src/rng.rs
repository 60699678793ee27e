//! Keyed counter-based random streams.
//!
//! Noise realizations and measurement sampling must be replayable and safe
//! to evaluate in parallel, so instead of one mutable generator there is a
//! stateless keyed stream per logical site: a stream is derived from the
//! master seed plus a path of integers (trajectory id, gate index, ...) and
//! then produces values by mixing a counter. The mixer is the SplitMix64
//! finalizer, which is cheap and passes the usual statistical batteries for
//! this kind of use.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: a bijective avalanche mix on 64 bits.
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic stream addressed by `(master_seed, path...)`.
#[derive(Clone, Copy, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(master_seed: u64, path: &[u64]) -> Self {
        let mut key = mix64(master_seed);
        for (depth, part) in path.iter().enumerate() {
            key = mix64(key ^ part.wrapping_add(GOLDEN.wrapping_mul(depth as u64 + 1)));
        }
        CounterRng { key, counter: 0 }
    }

    #[inline(always)]
    pub fn next_u64(&mut self) -> u64 {
        let v = mix64(self.key ^ mix64(self.counter));
        self.counter = self.counter.wrapping_add(1);
        v
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline(always)]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, n)` by widening multiply. The modulo bias is O(n/2^64),
    /// irrelevant for the small ranges used here.
    #[inline(always)]
    pub fn next_below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}
