//! Counter-based random number generation.
//!
//! Every draw is a pure function of `(seed, step, draw index)`, so parallel
//! and serial execution of the same experiment sample identical values and
//! runs replay bit-identically on any platform. Not cryptographic.

/// Identifies the random stream of one optimization step within one seeded run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngKey {
    seed: u64,
    step: u64,
}

impl RngKey {
    pub fn new(seed: u64, step: u64) -> Self {
        Self { seed, step }
    }

    /// Raw 64-bit output for draw `index` under this key.
    #[inline]
    pub fn draw(&self, index: u64) -> u64 {
        mix3(self.seed, self.step, index)
    }

    /// Sequential view over the key's draw counter.
    pub fn stream(self) -> KeyedStream {
        KeyedStream { key: self, counter: 0 }
    }
}

/// SplitMix64-style finalizer over three words; full avalanche per draw.
#[inline]
fn mix3(a: u64, b: u64, c: u64) -> u64 {
    let mut z = a
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(b.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(c.wrapping_mul(0x94D0_49BB_1331_11EB))
        .wrapping_add(0x2545_F491_4F6C_DD1D);
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z
}

/// Stateful counter over an [`RngKey`].
#[derive(Clone, Debug)]
pub struct KeyedStream {
    key: RngKey,
    counter: u64,
}

impl KeyedStream {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = self.key.draw(self.counter);
        self.counter += 1;
        v
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_uniform()
    }

    /// Standard normal via Box-Muller.
    pub fn next_gaussian(&mut self) -> f64 {
        // Shift u1 away from zero so the log is finite.
        let u1 = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
            + (1.0 / (1u64 << 54) as f64);
        let u2 = self.next_uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Uniform index in `[0, n)`; `n` must be positive.
    #[inline]
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Modulo bias is negligible for n << 2^64.
        (self.next_u64() % n as u64) as usize
    }
}
