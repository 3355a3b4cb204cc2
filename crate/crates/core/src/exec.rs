//! Execution of independent work blocks.
//!
//! Monte Carlo estimators split their samples into fixed-size blocks, each
//! with its own keyed stream, and merge block results in block order. The
//! split never depends on the number of workers, so a [`BlockRunner`] only
//! decides *where* blocks run.

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::{SeedKey, Stream};
use crate::stats::Moments;

pub trait BlockRunner: Sync {
    /// Evaluates `f(0), …, f(blocks - 1)` and returns the results in order.
    fn run<T, F>(&self, blocks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every block on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl BlockRunner for Sequential {
    fn run<T, F>(&self, blocks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..blocks).map(f).collect()
    }
}

/// Samples per Monte Carlo block.
pub const MC_BLOCK: usize = 1 << 14;

/// Splits `n` samples into `(block count, size of block b)`.
pub fn blocks_for(n: usize) -> usize {
    n.div_ceil(MC_BLOCK)
}

pub fn block_len(n: usize, b: usize) -> usize {
    let start = b * MC_BLOCK;
    MC_BLOCK.min(n.saturating_sub(start))
}

/// Runs `n` Monte Carlo samples in keyed blocks and merges `k` running
/// moments in block order. `f(stream, len, acc)` draws `len` samples from
/// `stream` and pushes into the `k` accumulators in `acc`.
pub fn monte_carlo<R, F>(runner: &R, key: SeedKey, n: usize, k: usize, f: F) -> Vec<Moments>
where
    R: BlockRunner + ?Sized,
    F: Fn(&mut Stream, usize, &mut [Moments]) + Sync + Send,
{
    let parts = runner.run(blocks_for(n), |b| {
        let mut acc = vec![Moments::new(); k];
        let mut stream = key.child(b as u64).rng();
        f(&mut stream, block_len(n, b), &mut acc);
        acc
    });
    let mut total = vec![Moments::new(); k];
    for part in parts {
        for (t, p) in total.iter_mut().zip(&part) {
            t.merge(p);
        }
    }
    total
}
