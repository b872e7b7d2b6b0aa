//! Reproducible random streams.
//!
//! Each dataset draws from its own ChaCha stream, keyed by a stable hash of
//! the master seed and the stream labels. Streams do not depend on the order
//! in which replications are executed.

use alloc::string::String;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub scenario: String,
    pub role: String,
    pub replication: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SeedSpec {
    pub fn new(master_seed: u64, scenario: impl Into<String>, role: impl Into<String>, replication: u64) -> Self {
        Self {
            master_seed,
            scenario: scenario.into(),
            role: role.into(),
            replication,
        }
    }

    /// Same labels, different role.
    pub fn with_role(&self, role: impl Into<String>) -> Self {
        Self {
            role: role.into(),
            ..self.clone()
        }
    }

    /// Stable 64-bit key of `(master_seed, scenario, role, replication)`.
    pub fn child_seed(&self) -> u64 {
        let mut h = fnv1a(FNV_OFFSET, &self.master_seed.to_le_bytes());
        // length prefixes keep ("ab", "c") distinct from ("a", "bc")
        for label in [&self.scenario, &self.role] {
            h = fnv1a(h, &(label.len() as u64).to_le_bytes());
            h = fnv1a(h, label.as_bytes());
        }
        h = fnv1a(h, &self.replication.to_le_bytes());
        splitmix64(h)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.child_seed())
    }
}
