use lcfuse_core::exec::Executor;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Items per parallel run. Fixed so the partition never depends on the
/// thread count (kernels are per-item anyway, this is belt and braces).
const ITEMS_PER_RUN: usize = 4096;

/// Rayon-backed executor on a dedicated pool.
#[derive(Debug)]
pub struct Parallel {
    pool: ThreadPool,
}

impl Parallel {
    /// `threads = 0` uses every available core.
    pub fn new(threads: usize) -> anyhow::Result<Self> {
        let pool = ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Parallel {
    fn for_each_chunk<T, F>(&self, data: &mut [T], item_len: usize, kernel: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let run = ITEMS_PER_RUN * item_len;
        self.pool.install(|| {
            data.par_chunks_mut(run)
                .enumerate()
                .for_each(|(i, chunk)| kernel(i * ITEMS_PER_RUN, chunk));
        });
    }
}
