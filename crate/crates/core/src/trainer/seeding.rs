use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for `(seed, stream, step, index)`.
///
/// Every random draw in training is keyed this way, so results do not
/// depend on thread count or scheduling order.
pub fn stream_rng(seed: u64, stream: u64, step: u64, index: u64) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for part in [stream, step, index] {
        h = splitmix(h ^ part);
    }
    ChaCha8Rng::seed_from_u64(h)
}

pub(crate) const STREAM_WARMUP: u64 = 2;
pub(crate) const STREAM_TASKS: u64 = 3;
pub(crate) const STREAM_ROLLOUT: u64 = 4;
