//! Seeded RNG construction. Every random stream in the pipeline is a ChaCha8
//! generator keyed from a run seed and a stream tag, so results do not depend
//! on the order in which components are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes `seed` with a stream tag (splitmix64 finaliser over an FNV-1a hash).
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix(seed ^ h)
}

/// Same as [`derive_seed`] with additional integer coordinates.
pub fn derive_seed_indexed(seed: u64, stream: &str, indices: &[u64]) -> u64 {
    indices
        .iter()
        .fold(derive_seed(seed, stream), |acc, &i| splitmix(acc ^ splitmix(i)))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
