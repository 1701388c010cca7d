//! Deterministic, splittable random streams.
//!
//! A [`RandomStream`] is a ChaCha8 keystream whose 256-bit key is derived from
//! a user seed and a path of integer labels. Child streams are derived by
//! label without consuming any output of the parent, so work item `i` of a
//! parallel loop can always use `parent.substream(i)` and obtain the same
//! numbers regardless of scheduling or thread count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// User-facing seed for a reproducible run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    /// A child seed identified by a path of labels, e.g. `(t index, repetition)`.
    pub fn derive(self, labels: &[u64]) -> Seed {
        let mut s = RandomStream::new(self).substream_path(labels);
        Seed(s.next_u64())
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

#[derive(Clone, Debug)]
pub struct RandomStream {
    key: [u64; 4],
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: Seed) -> Self {
        let mut state = seed.0 ^ 0x5851_F42D_4C95_7F2D;
        let key = [
            splitmix64(&mut state),
            splitmix64(&mut state),
            splitmix64(&mut state),
            splitmix64(&mut state),
        ];
        Self::from_key(key)
    }

    fn from_key(key: [u64; 4]) -> Self {
        let mut bytes = [0u8; 32];
        for (chunk, word) in bytes.chunks_exact_mut(8).zip(key.iter()) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        Self {
            key,
            rng: ChaCha8Rng::from_seed(bytes),
        }
    }

    /// Derive an independent child stream identified by `label`.
    pub fn substream(&self, label: u64) -> Self {
        let mut key = [0u64; 4];
        let mut state = label.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03;
        for (i, k) in key.iter_mut().enumerate() {
            state ^= self.key[i];
            *k = splitmix64(&mut state);
        }
        Self::from_key(key)
    }

    /// Derive a child stream from a path of labels.
    pub fn substream_path(&self, labels: &[u64]) -> Self {
        labels
            .iter()
            .fold(self.clone_fresh(), |s, &l| s.substream(l))
    }

    /// The same stream rewound to its start.
    pub fn clone_fresh(&self) -> Self {
        Self::from_key(self.key)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`. `n` must be non-zero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let n = n as u64;
        // Lemire's multiply-shift with rejection.
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.rng.next_u64();
            let m = (x as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
