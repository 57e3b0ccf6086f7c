//! Derived random streams.
//!
//! Every route and calibration cell draws from its own ChaCha stream whose
//! seed is a hash of the master seed and the cell coordinates, so results do
//! not depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags keeping route and calibration seeds apart.
pub const TAG_ROUTE: u64 = 0x524f_5554;
pub const TAG_CALIBRATION: u64 = 0x4341_4c42;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes the master seed with a list of coordinates.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(master: u64, parts: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, parts))
}
