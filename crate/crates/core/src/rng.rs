//! Counter-based random substreams.
//!
//! Every Monte Carlo consumer draws from ChaCha8 keyed by the master seed,
//! with the 64-bit stream selector identifying a fixed-size block of work.
//! A block always produces the same numbers no matter which worker runs it,
//! so results depend on `(seed, n_samples)` only, never on `worker_count`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per block of Monte Carlo work.
pub const BLOCK_SIZE: u64 = 1 << 14;

/// Stream-id namespaces, so different consumers of one seed never alias.
pub const NS_SAMPLES: u64 = 0;
pub const NS_STARTS: u64 = 1 << 48;
pub const NS_PILOT: u64 = 2 << 48;
pub const NS_OVERLAP: u64 = 3 << 48;

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `(block index, samples in block)` for `n` samples.
pub fn blocks(n: u64) -> impl Iterator<Item = (u64, u64)> + Clone {
    let full = n / BLOCK_SIZE;
    let rem = n % BLOCK_SIZE;
    (0..full)
        .map(|b| (b, BLOCK_SIZE))
        .chain((rem > 0).then_some((full, rem)))
}

/// Runs `job` on every block, in parallel, returning results in block order.
///
/// `workers == 0` uses the global rayon pool.
pub fn map_blocks<A, F>(n: u64, workers: usize, job: F) -> Vec<A>
where
    A: Send,
    F: Fn(u64, u64) -> A + Sync + Send,
{
    let list: Vec<(u64, u64)> = blocks(n).collect();
    let run = || list.par_iter().map(|&(b, len)| job(b, len)).collect();
    if workers == 0 {
        run()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        }
    }
}

/// Runs `job(i)` for `i in 0..count` in parallel, results in index order.
pub fn map_indexed<A, F>(count: usize, workers: usize, job: F) -> Vec<A>
where
    A: Send,
    F: Fn(usize) -> A + Sync + Send,
{
    let run = || (0..count).into_par_iter().map(&job).collect();
    if workers == 0 {
        run()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a: Vec<u64> = substream(7, 3).sample_iter(rand::distributions::Standard).take(4).collect();
        let b: Vec<u64> = substream(7, 3).sample_iter(rand::distributions::Standard).take(4).collect();
        let c: Vec<u64> = substream(7, 4).sample_iter(rand::distributions::Standard).take(4).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn blocks_cover_exactly() {
        let n = 3 * BLOCK_SIZE + 17;
        let total: u64 = blocks(n).map(|(_, len)| len).sum();
        assert_eq!(total, n);
        assert_eq!(blocks(0).count(), 0);
    }

    #[test]
    fn block_results_independent_of_workers() {
        let job = |b: u64, len: u64| {
            let mut rng = substream(11, b);
            (0..len).map(|_| rng.gen::<f64>()).sum::<f64>()
        };
        let one = map_blocks(5 * BLOCK_SIZE + 3, 1, job);
        let four = map_blocks(5 * BLOCK_SIZE + 3, 4, job);
        assert_eq!(one, four);
    }
}
