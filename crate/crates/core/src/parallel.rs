//! Optional worker pool. Results always come back in index order, so the
//! worker count never changes what a computation returns.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub struct Workers {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Workers {
    /// A pool of `n` threads; `n <= 1` runs everything on the caller.
    pub fn new(n: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            let pool = (n > 1).then(|| rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool"));
            Workers { pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = n;
            Workers {}
        }
    }

    pub fn single() -> Self {
        Workers::new(1)
    }

    pub fn threads(&self) -> usize {
        #[cfg(feature = "parallel")]
        if let Some(p) = &self.pool {
            return p.current_num_threads();
        }
        1
    }

    /// `f(0), f(1), ..., f(n-1)`, possibly computed concurrently.
    pub fn map<T, F>(&self, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(p) = &self.pool {
            return p.install(|| (0..n).into_par_iter().map(&f).collect());
        }
        (0..n).map(f).collect()
    }
}

impl Default for Workers {
    fn default() -> Self {
        Workers::single()
    }
}

impl std::fmt::Debug for Workers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Workers({})", self.threads())
    }
}
