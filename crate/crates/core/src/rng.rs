//! Deterministic, splittable random streams.
//!
//! Every stochastic operation takes an explicit `&mut impl Rng`. Streams for
//! independent jobs are derived from a master seed and a path of integer
//! coordinates (device, class, run, ...) so that generation order never
//! influences the values produced.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Domain tags used as the first path coordinate when deriving streams.
pub mod domain {
    pub const CORPUS: u64 = 0x636f_7270;
    pub const SPLIT: u64 = 0x7370_6c74;
    pub const TRAIN: u64 = 0x7472_6e00;
    pub const ATTACK: u64 = 0x6174_6b00;
    pub const ADV_AUGMENT: u64 = 0x6176_6700;
    pub const BATTERY: u64 = 0x6274_7279;
    pub const NOISE_DEFENSE: u64 = 0x6e64_6600;
    pub const EXPLAIN: u64 = 0x6578_706c;
    pub const FOLDS: u64 = 0x666f_6c64;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a master seed and a coordinate path into a 64-bit seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = master;
    let mut acc = splitmix64(&mut state);
    for &coord in path {
        state ^= coord.wrapping_mul(0xff51_afd7_ed55_8ccd);
        acc ^= splitmix64(&mut state);
        state = acc;
    }
    acc
}

/// Build the random stream for `(master, path...)`.
pub fn stream(master: u64, path: &[u64]) -> Stream {
    Stream::seed_from_u64(derive_seed(master, path))
}
