//! Seeded random stream shared by every engine.
//!
//! ChaCha8 from `rand_chacha` 0.9. Stream 0 drives reaction kinetics; other
//! stream numbers are handed to independent consumers such as arrival
//! generators, so changing the network never perturbs the traffic.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Algorithm identifier recorded in trace headers.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9/exp-f32";

#[derive(Clone, Debug)]
pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SimRng { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on (0, 1].
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unit-rate exponential variate, rounded to the nearest binary32 value so
    /// that single-precision consumers see exactly the same number.
    pub fn exp1(&mut self) -> f64 {
        let e = -libm::log(self.uniform_open());
        e as f32 as f64
    }

    /// Exponential variate with the given mean, full double precision.
    pub fn exp_mean(&mut self, mean: f64) -> f64 {
        -libm::log(self.uniform_open()) * mean
    }

    /// Uniform integer in [lo, hi].
    pub fn range_u64(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        let span = hi - lo;
        if span == u64::MAX {
            return self.next_u64();
        }
        lo + self.next_u64() % (span + 1)
    }
}
