//! Counter-based random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream addressed by
//! `(master seed, domain, index)`: the key comes from the seed and domain,
//! the stream id is the index. Work split across threads by index therefore
//! yields the same numbers regardless of thread count or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Separates the uses of one master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    NullLimit = 1,
    LocalPower = 2,
    Replicate = 3,
    Jitter = 4,
}

/// Draws per block for bulk Monte Carlo.
pub const BLOCK: usize = 8192;

pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let key = seed ^ (domain as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Generates `total` values in fixed-size blocks, each block from its own
/// stream, concatenated in block order.
pub fn par_blocks<T, F>(total: usize, seed: u64, domain: Domain, fill: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize, &mut Vec<T>) + Sync,
{
    let blocks = total.div_ceil(BLOCK);
    let chunks: Vec<Vec<T>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = BLOCK.min(total - b * BLOCK);
            let mut rng = stream(seed, domain, b as u64);
            let mut out = Vec::with_capacity(len);
            fill(&mut rng, len, &mut out);
            out
        })
        .collect();
    let mut all = Vec::with_capacity(total);
    for c in chunks {
        all.extend(c);
    }
    all
}
