//! Seeding.
//!
//! Replication `k` under base seed `s` draws its points from
//! `ChaCha8Rng::seed_from_u64(s)` on stream `k`. Edge decisions use a
//! counter-based uniform indexed by the unordered vertex pair, keyed by
//! `splitmix64(s ^ splitmix64(k ^ PAIR_SALT))`, so any two graphs built on
//! the same point set see the same uniform for the same pair.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PAIR_SALT: u64 = 0x5bd1_e995_7f4a_7c15;

/// One step of the SplitMix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RepStream {
    pub base_seed: u64,
    pub rep: u64,
}

impl RepStream {
    pub fn new(base_seed: u64, rep: u64) -> Self {
        RepStream { base_seed, rep }
    }

    pub fn point_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(self.rep);
        rng
    }

    pub fn pair_uniforms(&self) -> PairUniforms {
        PairUniforms {
            key: splitmix64(self.base_seed ^ splitmix64(self.rep ^ PAIR_SALT)),
        }
    }

    /// Independent auxiliary seed (bootstrap and the like).
    pub fn derived_seed(&self, salt: u64) -> u64 {
        splitmix64(self.pair_uniforms().key ^ splitmix64(salt))
    }
}

/// Uniform `[0,1)` variates indexed by unordered vertex pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairUniforms {
    key: u64,
}

impl PairUniforms {
    #[inline]
    pub fn get(&self, i: u32, j: u32) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let h = splitmix64(self.key ^ splitmix64(((a as u64) << 32) | b as u64));
        (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
