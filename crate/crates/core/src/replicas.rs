//! Seeded replica streams and replica-level parallelism.
//!
//! Replica `k` of a run with seed `s` draws from a ChaCha8 stream keyed by a
//! hash of `(s, k)`, so its output never depends on how many replicas run or
//! on how they are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Keyed hash of `(seed, replica)`.
pub fn replica_seed(seed: u64, replica: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ replica.wrapping_mul(GOLDEN).rotate_left(17))
}

pub fn replica_rng(seed: u64, replica: u64) -> SimRng {
    SimRng::seed_from_u64(replica_seed(seed, replica))
}

/// Runs `count` replicas, replica `k` with [`replica_rng`]`(seed, k)`.
///
/// Uses the rayon pool when the `parallel` feature is on; the returned vector
/// is in replica order either way.
pub fn run_replicas<T, F>(seed: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        run_replicas_parallel(seed, count, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_replicas_sequential(seed, count, f)
    }
}

pub fn run_replicas_sequential<T, F>(seed: u64, count: usize, f: F) -> Vec<T>
where
    F: Fn(usize, &mut SimRng) -> T,
{
    (0..count)
        .map(|k| {
            let mut rng = replica_rng(seed, k as u64);
            f(k, &mut rng)
        })
        .collect()
}

#[cfg(feature = "parallel")]
pub fn run_replicas_parallel<T, F>(seed: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = replica_rng(seed, k as u64);
            f(k, &mut rng)
        })
        .collect()
}

/// Pins the global rayon pool to `threads` workers. A no-op without the
/// `parallel` feature. Fails if the pool was already initialised.
pub fn configure_threads(threads: usize) -> Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(())
    }
}
