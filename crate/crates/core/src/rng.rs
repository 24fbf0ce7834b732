//! Deterministic, splittable random state.
//!
//! All randomness in this crate flows through [`SplitRng`], an explicit
//! ChaCha8 state that is passed into every stochastic operation. There is no
//! global RNG. Child states are derived either sequentially ([`SplitRng::split`])
//! or from fixed integer tags ([`SplitRng::from_tags`]), so the random stream
//! consumed by one component never depends on what another component drew.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Splittable deterministic RNG; a thin wrapper around ChaCha8.
#[derive(Debug, Clone)]
pub struct SplitRng {
    inner: ChaCha8Rng,
}

impl SplitRng {
    /// Root state for a run, from the single user-facing seed.
    pub fn seed_from(seed: u64) -> Self {
        Self::from_tags(seed, [0, 0, 0])
    }

    /// Derives an independent state from the seed and up to three fixed tags
    /// (for example `[phase, epoch, corpus]`). Insensitive to call order.
    pub fn from_tags(seed: u64, tags: [u64; 3]) -> Self {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&tags[0].to_le_bytes());
        key[16..24].copy_from_slice(&tags[1].to_le_bytes());
        key[24..32].copy_from_slice(&tags[2].to_le_bytes());
        SplitRng {
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    /// Splits off a child state; the parent advances.
    pub fn split(&mut self) -> Self {
        let mut key = [0u8; 32];
        self.inner.fill_bytes(&mut key);
        SplitRng {
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    pub fn unit_f64(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit_f64()
    }

    /// Uniform index in `[0, n)`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Bernoulli draw with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit_f64() < p
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        use rand::seq::SliceRandom;
        xs.shuffle(&mut self.inner);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SplitRng::seed_from(7);
        let mut b = SplitRng::seed_from(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn tags_give_distinct_streams() {
        let mut a = SplitRng::from_tags(7, [1, 0, 0]);
        let mut b = SplitRng::from_tags(7, [2, 0, 0]);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn split_children_are_independent_of_later_parent_use() {
        let mut parent1 = SplitRng::seed_from(3);
        let mut child1 = parent1.split();
        let _ = parent1.next_u64();

        let mut parent2 = SplitRng::seed_from(3);
        let mut child2 = parent2.split();
        let xs1: Vec<u64> = (0..10).map(|_| child1.next_u64()).collect();
        let xs2: Vec<u64> = (0..10).map(|_| child2.next_u64()).collect();
        assert_eq!(xs1, xs2);
    }

    #[test]
    fn shuffle_is_deterministic() {
        let mut a = SplitRng::seed_from(11);
        let mut b = SplitRng::seed_from(11);
        let mut xs: Vec<u32> = (0..50).collect();
        let mut ys: Vec<u32> = (0..50).collect();
        a.shuffle(&mut xs);
        b.shuffle(&mut ys);
        assert_eq!(xs, ys);
    }
}
