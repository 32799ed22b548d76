//! Reproducible random chunk sizes.
//!
//! The generator is xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`). A draw in `[lo, hi]` takes one
//! 64-bit output `x` and returns `lo + ((x * (hi - lo + 1)) >> 64)` computed
//! in 128-bit arithmetic, so any implementation of xoshiro256++ reproduces the
//! same chunk sequence bit for bit.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Debug, Clone)]
pub struct ChunkRng {
    inner: Xoshiro256PlusPlus,
}

impl ChunkRng {
    pub fn new(seed: u64) -> Self {
        ChunkRng {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Integer uniform on the inclusive range `[lo, hi]`.
    pub fn uniform_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo) as u128 + 1;
        lo + ((self.next_u64() as u128 * span) >> 64) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let mut a = ChunkRng::new(7);
        let mut b = ChunkRng::new(7);
        for _ in 0..1000 {
            let x = a.uniform_inclusive(3, 9);
            assert_eq!(x, b.uniform_inclusive(3, 9));
            assert!((3..=9).contains(&x));
        }
        assert_eq!(ChunkRng::new(1).uniform_inclusive(5, 5), 5);
    }

    #[test]
    fn full_range_does_not_overflow() {
        let mut r = ChunkRng::new(0);
        let _ = r.uniform_inclusive(0, u64::MAX - 1);
    }
}
