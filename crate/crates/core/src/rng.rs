//! Seeded, position-tracked random stream.
//!
//! Backed by ChaCha8, whose output is specified bit-for-bit, so a
//! `(seed, word_pos)` pair reproduces the same draws on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

/// Serializable snapshot of an [`RngStream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    /// Position in 32-bit words; stored as a decimal string since JSON
    /// numbers cannot carry a full u128.
    #[serde(with = "u128_string")]
    pub word_pos: u128,
}

mod u128_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn position(&self) -> u128 {
        self.inner.get_word_pos()
    }

    pub fn state(&self) -> RngState {
        RngState {
            seed: self.seed,
            word_pos: self.position(),
        }
    }

    pub fn from_state(state: RngState) -> Self {
        let mut s = Self::new(state.seed);
        s.inner.set_word_pos(state.word_pos);
        s
    }

    /// Derives an independent child stream, advancing this one by one draw.
    pub fn fork(&mut self) -> RngStream {
        RngStream::new(self.inner.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.inner);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_draws() {
        let mut a = RngStream::new(7);
        let mut b = RngStream::new(7);
        for _ in 0..100 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
        }
    }

    #[test]
    fn state_restores_position() {
        let mut a = RngStream::new(99);
        for _ in 0..17 {
            a.normal();
        }
        let mut b = RngStream::from_state(a.state());
        for _ in 0..10 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn state_json_round_trip() {
        let mut a = RngStream::new(3);
        a.next_u64();
        let json = serde_json::to_string(&a.state()).unwrap();
        let back: RngState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a.state());
    }

    #[test]
    fn known_first_draw_is_stable() {
        // ChaCha8 output is fixed by its specification; pin one value so a
        // dependency bump that changed the stream would be caught.
        assert_eq!(RngStream::new(0).next_u64(), 13_080_132_717_333_068_652);
    }
}
