//! Reproducible random streams keyed by `(seed, path, role)`.
//!
//! ChaCha is counter-based: a stream id selects an independent keystream for
//! the same key, so any path can be regenerated without touching the others
//! and the result does not depend on how paths are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for within one Monte Carlo path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamRole {
    Subordinator = 0,
    Diffusion = 1,
    Auxiliary = 2,
}

pub fn stream_rng(seed: u64, path: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((path << 2) | role as u64);
    rng
}
