//! Seeded, stream-separated random generators.
//!
//! Every random draw in the workspace comes from [`rng_stream`]. A stream is
//! a ChaCha8 keystream selected by the 64-bit stream word, so two ids under
//! the same seed never share output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn rng_stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Consumers of randomness; each gets a disjoint block of stream ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    Scene = 1,
    Scanpath = 2,
    Bias = 3,
    Camera = 4,
    Calibration = 5,
    ModelInit = 6,
    Shuffle = 7,
    Subject = 8,
    Pipeline = 9,
}

/// Stream id for item `index` of `domain`.
pub fn stream_id(domain: StreamDomain, index: u64) -> u64 {
    ((domain as u64) << 48) | (index & ((1 << 48) - 1))
}
