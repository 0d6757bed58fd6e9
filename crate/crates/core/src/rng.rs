//! Hierarchical seeded random streams.
//!
//! A [`RngSpec`] is a master seed plus a derivation path. Every consumer
//! (projection direction, pool subsample, synthetic phase) derives its own
//! child spec, so the stream it sees depends only on the path and never on
//! evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One step of a derivation path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamLabel {
    pub purpose: String,
    pub indices: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub master_seed: u64,
    pub stream_labels: Vec<StreamLabel>,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

impl RngSpec {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            stream_labels: Vec::new(),
        }
    }

    /// Returns a child spec with `(purpose, indices)` appended to the path.
    pub fn derive(&self, purpose: &str, indices: &[u64]) -> Self {
        let mut child = self.clone();
        child.stream_labels.push(StreamLabel {
            purpose: purpose.to_owned(),
            indices: indices.to_vec(),
        });
        child
    }

    /// 64-bit digest of the full path, used to seed the generator.
    pub fn stream_seed(&self) -> u64 {
        let mut h = splitmix64(self.master_seed);
        for label in &self.stream_labels {
            h = splitmix64(h ^ fnv1a(label.purpose.as_bytes()));
            h = splitmix64(h ^ label.indices.len() as u64);
            for &i in &label.indices {
                h = splitmix64(h ^ splitmix64(i));
            }
        }
        h
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.stream_seed())
    }
}

/// Maps a signed level label onto a derivation index.
pub(crate) fn level_index(level: i32) -> u64 {
    u64::from(level as u32)
}
