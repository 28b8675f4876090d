//! Seeded random streams.
//!
//! Every stream is a xoshiro256** generator whose state is expanded from a
//! 64-bit seed by splitmix64. Independent streams are derived from a master
//! seed and a stream index so that, for example, epoch `e` of a training run
//! always sees the same draws regardless of what earlier epochs consumed.

use rand::SeedableRng;
pub use rand_xoshiro::Xoshiro256StarStar as Rng;

/// Stream index reserved for parameter initialization.
pub const INIT_STREAM: u64 = 0xA11C_E000_0000_0001;
/// Stream index reserved for molecule-vector initialization.
pub const VECTOR_INIT_STREAM: u64 = 0xA11C_E000_0000_0002;
/// Stream index reserved for objective evaluation (fixed negatives).
pub const EVAL_STREAM: u64 = 0xA11C_E000_0000_0003;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn stream(seed: u64, index: u64) -> Rng {
    Rng::seed_from_u64(seed ^ index.wrapping_add(1).wrapping_mul(GOLDEN))
}
