//! Seeded counter-based random streams.
//!
//! Every consumer of randomness asks for a `(seed, stream)` pair. ChaCha is
//! counter based, so two different streams under the same seed never overlap
//! and the output of one stream does not depend on how many values another
//! stream has drawn. This keeps d-dimensional and ensemble generation
//! reproducible under any parallel schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id for coordinate `coordinate` of process component `component`
/// (0 for the main fBm, 1 for the independent drift fBm of a mixed path).
pub fn path_stream(component: u32, coordinate: u32) -> u64 {
    (u64::from(component) << 32) | u64::from(coordinate)
}

/// Streams reserved for non-path consumers (measure sampling, pair sampling,
/// Monte Carlo chunks) live above this offset.
pub const AUX_STREAM_BASE: u64 = 1 << 48;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn aux_rng(seed: u64, index: u64) -> ChaCha8Rng {
    stream_rng(seed, AUX_STREAM_BASE + index)
}
