//! Seeded, splittable randomness.
//!
//! Every random draw is taken from a substream addressed by
//! `(seed, stream name, sample index)`, so serial and parallel runs see the
//! same numbers regardless of how work is scheduled.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type SampleRng = ChaCha8Rng;

/// Samples handed to one parallel work item.
pub const CHUNK: u64 = 4096;

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key for the family of substreams belonging to one named experiment.
pub fn stream_key(seed: u64, name: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a(name)))
}

/// Generator for sample `index` of the stream identified by `key`.
pub fn substream(key: u64, index: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Runs `f` over consecutive index ranges of size [`CHUNK`] in parallel and
/// returns the per-chunk results in index order.
pub fn chunked<T, F>(total: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync + Send,
{
    let chunks = total.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            f(start..(start + CHUNK).min(total))
        })
        .collect()
}

/// Evaluates `f(index, rng)` for every sample and returns the values in index order.
pub fn sample_values<F>(total: u64, key: u64, f: F) -> Vec<f64>
where
    F: Fn(&mut SampleRng) -> f64 + Sync + Send,
{
    chunked(total, |range| {
        range
            .map(|i| {
                let mut rng = substream(key, i);
                f(&mut rng)
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}
