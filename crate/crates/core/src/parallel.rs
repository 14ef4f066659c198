//! Execution policy for the data-parallel loops (IG over inputs, top-k retrains).
//!
//! With the `parallel` feature the `Parallel` policy runs on rayon; without it
//! every policy runs sequentially. Results never depend on the policy: work
//! items are computed independently and collected in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Maps `f` over `0..n`, returning results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Runs `f` inside a pool of `jobs` threads (or the global pool when `jobs` is 0).
    pub fn with_jobs<R: Send>(self, jobs: usize, f: impl FnOnce() -> R + Send) -> R {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel if jobs > 0 => match rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
            {
                Ok(pool) => pool.install(f),
                Err(e) => {
                    log::warn!("could not build a {jobs}-thread pool ({e}); using the global pool");
                    f()
                }
            },
            _ => {
                let _ = jobs;
                f()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sqrt() * 3.0;
        let a = Execution::Sequential.map(100, f);
        let b = Execution::Parallel.map(100, f);
        assert_eq!(a, b);
        let c = Execution::Parallel.with_jobs(2, || Execution::Parallel.map(100, f));
        assert_eq!(a, c);
    }
}
