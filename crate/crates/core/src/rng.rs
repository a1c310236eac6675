//! Seeded random streams.
//!
//! Every stochastic operation takes an explicit [`Stream`]. Streams are
//! ChaCha8 keyed by a 64-bit seed (expanded with `SeedableRng::seed_from_u64`)
//! and a 64-bit stream id, so `(seed, stream_id)` always yields the same sequence
//! and distinct ids never overlap. Normal draws use `rand_distr::StandardNormal`
//! (ziggurat).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64, stream_id: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Stream ids used by the library; per-image streams are offset by the image index.
pub mod ids {
    pub const PIPELINE_PLAN: u64 = 1;
    pub const NOISE_FIELD: u64 = 2;
    pub const REVERSE_INIT: u64 = 3;
    pub const REVERSE_STEPS: u64 = 4;
    pub const PREDICTOR_PERTURBATION: u64 = 5;
    /// Base offset for per-image streams: `PER_IMAGE_BASE + index`.
    pub const PER_IMAGE_BASE: u64 = 1 << 32;
}

/// Stream for the image at position `index` of a sorted batch.
pub fn image_stream(seed: u64, index: u64) -> Stream {
    stream(seed, ids::PER_IMAGE_BASE + index)
}

#[inline]
pub fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn normals(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}
