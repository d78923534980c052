//! Per-replica random streams.
//!
//! Replica `i` of an experiment gets its own ChaCha8 stream keyed by the
//! master seed and an experiment tag, with stream id `i`. Results are then
//! independent of how replicas are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn replica_rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
