//! Indexed data-parallel map with a sequential fallback.
//!
//! Every task is identified by its index and owns its RNG stream, so the
//! collected output is identical whichever backend runs it.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    /// Rayon with an optional worker cap; without the `parallel` feature this
    /// runs sequentially.
    #[default]
    Parallel,
    ParallelWith(usize),
}

impl Execution {
    pub fn from_workers(workers: Option<usize>) -> Self {
        match workers {
            None => Execution::Parallel,
            Some(0 | 1) => Execution::Sequential,
            Some(w) => Execution::ParallelWith(w),
        }
    }

    /// `(0..n).map(f).collect()`, possibly in parallel, preserving order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(feature = "parallel")]
            Execution::ParallelWith(workers) => {
                use rayon::prelude::*;
                match rayon::ThreadPoolBuilder::new().num_threads(*workers).build() {
                    Ok(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
                    Err(_) => (0..n).into_par_iter().map(f).collect(),
                }
            }
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel | Execution::ParallelWith(_) => (0..n).map(f).collect(),
        }
    }
}

/// SplitMix64 finalizer applied to `(seed, index)`; gives each task an
/// independent seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
