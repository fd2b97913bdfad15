//! Reproducible random streams.
//!
//! Every stream is a ChaCha20 generator seeded with `seed_from_u64(seed)` and
//! switched to stream number `stream`. Pinning the algorithm keeps draws
//! identical across platforms and releases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut r = ChaCha20Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }

    /// Stream used by replicate `r` of a simulation seeded with `seed`.
    pub fn replicate(seed: u64, r: u64) -> Self {
        RngStream { seed, stream: r }
    }
}

/// Uniform on (0, 1].
pub fn unif_oc<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Uniform on [0, 1).
pub fn unif<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
