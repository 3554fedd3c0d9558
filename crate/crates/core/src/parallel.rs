//! Deterministic data-parallel passes over contiguous sample blocks.
//!
//! Samples are cut into blocks whose boundaries depend only on the number of
//! samples, never on the thread count. Workers produce one partial result per
//! block and the caller folds those in ascending block order, so every
//! floating point sum is evaluated in the same order whatever the thread
//! count is.

use std::ops::Range;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{GmmError, Result};

const MIN_BLOCK_LEN: usize = 1024;
const MAX_BLOCKS: usize = 256;

/// Contiguous block boundaries covering `0..n`.
pub fn block_ranges(n: usize) -> Vec<Range<usize>> {
    let len = MIN_BLOCK_LEN.max(n.div_ceil(MAX_BLOCKS));
    (0..n).step_by(len.max(1)).map(|s| s..(s + len).min(n)).collect()
}

/// A fixed-size worker pool, or the calling thread alone.
pub struct Workers {
    pool: Option<ThreadPool>,
}

impl Workers {
    pub fn new(n_threads: usize) -> Result<Self> {
        if n_threads == 0 {
            return Err(GmmError::invalid("thread count must be at least 1"));
        }
        let pool = if n_threads == 1 {
            None
        } else {
            let pool = ThreadPoolBuilder::new()
                .num_threads(n_threads)
                .build()
                .map_err(|e| GmmError::invalid(format!("cannot start {n_threads} threads: {e}")))?;
            Some(pool)
        };
        Ok(Workers { pool })
    }

    pub fn n_threads(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    /// Runs `f` on every block of `0..n` and returns the results in block order.
    pub fn map_blocks<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> T + Sync + Send,
    {
        let blocks = block_ranges(n);
        match &self.pool {
            Some(pool) if blocks.len() > 1 => {
                pool.install(|| blocks.into_par_iter().map(&f).collect())
            }
            _ => blocks.into_iter().map(f).collect(),
        }
    }

    /// Like [`Workers::map_blocks`], stopping at the first failing block.
    pub fn try_map_blocks<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(Range<usize>) -> Result<T> + Sync + Send,
    {
        self.map_blocks(n, f).into_iter().collect()
    }
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
