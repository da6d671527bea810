//! Hierarchical seeding. A run is addressed by a root seed plus a path of
//! sub-stream indices (for example `[trial, layer]`); every path maps to an
//! independent ChaCha8 stream, so results never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator used by every sampler in the crate.
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    #[serde(default)]
    pub stream: Vec<u64>,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        RngSeed { seed, stream: Vec::new() }
    }

    /// Sub-stream `index` below this one.
    pub fn child(&self, index: u64) -> Self {
        let mut stream = self.stream.clone();
        stream.push(index);
        RngSeed { seed: self.seed, stream }
    }

    pub fn children(&self, path: &[u64]) -> Self {
        let mut stream = self.stream.clone();
        stream.extend_from_slice(path);
        RngSeed { seed: self.seed, stream }
    }

    fn key(&self) -> [u8; 32] {
        let mut state = self.seed ^ 0x5851_F42D_4C95_7F2D;
        let mut acc = splitmix64(&mut state);
        for (depth, &s) in self.stream.iter().enumerate() {
            let mut tag = s ^ ((depth as u64 + 1).wrapping_mul(0xD6E8_FEB8_6659_FD93));
            acc ^= splitmix64(&mut tag);
            state ^= acc;
            acc = splitmix64(&mut state);
        }
        let mut out = [0u8; 32];
        let mut s = acc;
        for chunk in out.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
        }
        out
    }

    pub fn rng(&self) -> SimRng {
        SimRng::from_seed(self.key())
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        RngSeed::new(seed)
    }
}
