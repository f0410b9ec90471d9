//! Counter-based random streams.
//!
//! Every random quantity in the pipeline is drawn from a ChaCha8 stream keyed
//! by a master seed and selected by a 64-bit stream id, so that item `k` of a
//! dataset can be regenerated without producing items `0..k` first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand::Rng;
pub use rand_chacha::ChaCha8Rng as StreamRng;

/// Stream-id namespaces. The upper 16 bits select the purpose, the lower 48
/// bits the item index.
pub mod purpose {
    pub const RING_PHANTOM: u64 = 1;
    pub const CIRCLES_PHANTOM: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const NET_INIT: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const THEORY: u64 = 6;
    pub const SAMPLING: u64 = 7;
}

/// Returns the stream for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 48) | (index & 0xFFFF_FFFF_FFFF));
    rng
}

/// Draws a standard normal variate.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}
