//! Seeded random streams and an unbiased Fisher-Yates shuffle.
//!
//! Every game draws from its own [`RandomStream`], whose seed is a pure
//! function of `(master_seed, config_id, game_index)`. Games can therefore be
//! scheduled on any thread in any order and still reproduce bit-for-bit.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

/// Name of the generator, recorded in every output's metadata.
pub const GENERATOR_NAME: &str = "xoshiro256++ (seed expanded by splitmix64)";

/// Name of the seed derivation, recorded alongside [`GENERATOR_NAME`].
pub const SEED_DERIVATION: &str =
    "splitmix64-finalizer(splitmix64-finalizer(splitmix64-finalizer(master) ^ cell*0x9E3779B97F4A7C15) ^ game*0xD1B54A32D192ED03)";

/// The splitmix64 output finalizer. Bijective on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A 64-bit pseudorandom stream owned by exactly one game.
#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: Xoshiro256PlusPlus,
}

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw from `[0, n)` using Lemire's widening multiply with
    /// rejection, so there is no modulo bias.
    ///
    /// Panics if `n == 0`.
    #[inline]
    pub fn bounded_uniform(&mut self, n: u64) -> u64 {
        assert!(n > 0, "bounded_uniform requires n > 0");
        let mut m = u128::from(self.next_u64()) * u128::from(n);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = u128::from(self.next_u64()) * u128::from(n);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }
}

/// In-place Fisher-Yates shuffle. Every permutation is equally likely given
/// an ideal generator.
pub fn shuffle<T>(items: &mut [T], rng: &mut RandomStream) {
    for i in (1..items.len()).rev() {
        let j = rng.bounded_uniform(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Per-game seed derivation for a whole experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPlan {
    pub master_seed: u64,
}

impl SeedPlan {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn game_seed(&self, config_id: u64, game_index: u64) -> u64 {
        let h = mix64(self.master_seed);
        let h = mix64(h ^ config_id.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        mix64(h ^ game_index.wrapping_mul(0xD1B5_4A32_D192_ED03))
    }

    pub fn stream_for(&self, config_id: u64, game_index: u64) -> RandomStream {
        RandomStream::from_seed(self.game_seed(config_id, game_index))
    }
}
