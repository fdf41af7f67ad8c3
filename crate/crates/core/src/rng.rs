//! Deterministic random streams.
//!
//! All randomness in this crate flows through [`Rng`] (a splitmix64 stream) or
//! through the stateless [`hash2`]/[`hash3`] combiners. Streams are cheap to
//! derive, so every independent consumer gets its own seed and results never
//! depend on evaluation order or thread count.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer: a bijective avalanche over u64.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a seed with one word into a new well-mixed seed.
#[inline]
pub fn hash2(a: u64, b: u64) -> u64 {
    mix64(mix64(a.wrapping_add(GOLDEN)).wrapping_add(b))
}

/// Combines a seed with two words.
#[inline]
pub fn hash3(a: u64, b: u64, c: u64) -> u64 {
    mix64(hash2(a, b).wrapping_add(c))
}

/// Maps a hash to the unit interval [0, 1).
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    // 53 high-quality bits, exactly representable.
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// splitmix64 sequential generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn seeded(seed: u64) -> Self {
        Rng { state: seed }
    }

    /// Derives an independent stream from a parent seed and a tag.
    pub fn derived(seed: u64, tag: u64) -> Self {
        Rng::seeded(hash2(seed, tag))
    }

    /// Raw state, for checkpointing.
    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn restore(state: u64) -> Self {
        Rng { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Uniform in 0..n via multiply-shift. `n` must be nonzero.
    #[inline]
    pub fn next_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform in [lo, hi).
    #[inline]
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}
