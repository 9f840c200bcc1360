//! Deterministic per-chain random streams.
//!
//! Every consumer gets its own generator derived from `(seed, level, purpose)`
//! with the chain index selecting the ChaCha stream. Results therefore do not
//! depend on how chains are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Keeps streams drawn at the same level apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Init = 1,
    Resample = 2,
    Evolve = 3,
    Other = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for chain `index` at `level`.
pub fn stream(seed: u64, level: usize, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let key = splitmix64(((level as u64) << 8) | purpose as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ key);
    rng.set_stream(index);
    rng
}

/// One generator per chain.
pub fn streams(seed: u64, level: usize, purpose: Purpose, n: usize) -> Vec<ChaCha8Rng> {
    (0..n as u64).map(|i| stream(seed, level, purpose, i)).collect()
}
