//! Counter-based deterministic random numbers.
//!
//! Streams are keyed by a 64-bit seed plus an arbitrary list of integer key
//! words (lattice sites, sample indices, ...). Two streams with different
//! keys are independent regardless of the order they are drawn in, which
//! keeps parallel experiments reproducible.

/// SplitMix64 finalizer; full-period avalanche on 64 bits.
#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic RNG whose state is derived from `(seed, key words)`.
#[derive(Clone, Debug)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self::keyed(seed, &[])
    }

    /// Derive an independent stream from `seed` and integer key words.
    pub fn keyed(seed: u64, key: &[i64]) -> Self {
        let mut s = splitmix(seed ^ 0x5851F42D4C957F2D);
        for (i, w) in key.iter().enumerate() {
            s = splitmix(s ^ (*w as u64).rotate_left(17 * (i as u32 + 1)));
        }
        // Avoid the all-zero fixed point of the mixing walk.
        if s == 0 {
            s = 0x9E3779B97F4A7C15;
        }
        Self { state: s }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0xA0761D6478BD642F);
        splitmix(self.state)
    }

    /// Uniform in the half-open interval `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        // 53 high bits -> exactly representable dyadic rationals in [0,1).
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[lo, hi]` (inclusive).
    #[inline]
    pub fn range_i64(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        lo + (self.next_u64() % span) as i64
    }

    /// Standard real Gaussian via Box-Muller.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Standard complex Gaussian with `E|g|^2 = 1` and `E g^2 = 0`.
    pub fn complex_gaussian(&mut self) -> (f64, f64) {
        let r = (self.gaussian(), self.gaussian());
        (r.0 / std::f64::consts::SQRT_2, r.1 / std::f64::consts::SQRT_2)
    }
}
