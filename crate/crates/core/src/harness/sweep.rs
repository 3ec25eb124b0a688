//! Runs independent seeds, on the rayon pool when the `parallel` feature is on.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to every seed; results keep the order of `seeds`.
pub fn sweep<T, F>(seeds: &[u64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        seeds.par_iter().map(|&s| f(s)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        sweep_sequential(seeds, f)
    }
}

pub fn sweep_sequential<T, F>(seeds: &[u64], f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    seeds.iter().map(|&s| f(s)).collect()
}
