//! Deterministic parallel searches for the first counterexample.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const CHUNK: u64 = 1 << 14;

/// First `i` in `0..n` (by index) for which `f` reports a failure.
pub(crate) fn first_fail<F: Send>(n: u64, f: impl Fn(u64) -> Option<F> + Sync + Send) -> Option<F> {
    (0..n).into_par_iter().find_map_first(f)
}

/// Draws `count` inputs from `rng` and returns the first failing one in draw order.
pub(crate) fn sample_fail<T: Send + Sync, F: Send>(
    rng: &mut ChaCha8Rng,
    count: u64,
    mut gen: impl FnMut(&mut ChaCha8Rng) -> T,
    test: impl Fn(&T) -> Option<F> + Sync + Send,
) -> Option<F> {
    let mut done = 0;
    while done < count {
        let len = CHUNK.min(count - done);
        let batch: Vec<T> = (0..len).map(|_| gen(rng)).collect();
        if let Some(f) = batch.par_iter().find_map_first(&test) {
            return Some(f);
        }
        done += len;
    }
    None
}

pub(crate) fn rand_index(rng: &mut ChaCha8Rng, n: u128) -> u128 {
    rng.gen_range(0..n)
}
