//! Deterministic, splittable random streams.
//!
//! Every stream is a ChaCha8 keystream. The 256-bit key is expanded from the
//! master seed with SplitMix64 (four successive outputs, little endian), and
//! the ChaCha 64-bit stream word is set to `stream_id`. Deriving a stream is
//! therefore O(1), and two different `stream_id`s under the same key read
//! disjoint keystreams.
//!
//! Integers are drawn with Lemire's widening-multiply rejection method, so
//! there is no modulo bias. Gaussians use the ziggurat sampler from
//! `rand_distr`, which is exact up to floating point.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{LabError, Result};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// One step of SplitMix64; returns the output and advances `state`.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn expand_key(master_seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut state = master_seed;
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
    stream_id: u64,
}

impl RandomStream {
    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Unbiased integer in `[0, n)`. `n` must be positive.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let mut m = (self.rng.next_u64() as u128) * (n as u128);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = (self.rng.next_u64() as u128) * (n as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Uniform integer in `[1, n]`.
    pub fn uniform_int(&mut self, n: u64) -> Result<u64> {
        if n == 0 {
            return Err(LabError::invalid("uniform_int requires n >= 1"));
        }
        Ok(self.below(n) + 1)
    }

    /// Uniform real in `[0, 1)` with 53 random bits.
    pub fn uniform01(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate.
    #[inline]
    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

pub fn derive_stream(master_seed: u64, stream_id: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::from_seed(expand_key(master_seed));
    rng.set_stream(stream_id);
    RandomStream { rng, stream_id }
}
