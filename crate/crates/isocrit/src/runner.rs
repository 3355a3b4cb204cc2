use isocrit_core::exec::BlockRunner;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "ISOCRIT_THREADS";

/// Runs blocks on a bounded rayon pool; results keep block order.
pub struct Pool {
    pool: ThreadPool,
}

impl Pool {
    /// `requested` workers (0 = all cores), capped by `ISOCRIT_THREADS`.
    pub fn new(requested: usize) -> Self {
        let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        let mut n = if requested == 0 { available } else { requested };
        if let Some(cap) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
            if cap > 0 {
                n = n.min(cap);
            }
        }
        let pool = ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("failed to build worker pool");
        Pool { pool }
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl BlockRunner for Pool {
    fn run<T, F>(&self, blocks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..blocks).into_par_iter().map(f).collect())
    }
}
