use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for one `(purpose, seed, stream)` combination.
///
/// The purpose salt keeps e.g. the split and the epoch shuffles from sharing a
/// keystream when the user passes the same seed to both.
pub(crate) fn stream_rng(purpose: u64, seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream);
    rng
}

pub(crate) const SPLIT: u64 = 1;
pub(crate) const KFOLD: u64 = 2;
pub(crate) const REBALANCE: u64 = 3;
pub(crate) const SHUFFLE: u64 = 4;
pub(crate) const INIT: u64 = 5;
pub(crate) const KNOCKOUT: u64 = 6;
pub(crate) const SYNTH: u64 = 7;
