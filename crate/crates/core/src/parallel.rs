//! Order-preserving parallel map over sample indices.
//!
//! With the `parallel` feature the work runs on a rayon pool of the requested
//! width; without it, or at width 1, it runs inline. Results always come back
//! in index order, so downstream folds do not depend on scheduling.

/// Width 0 means "use every available core".
pub const AUTO_WIDTH: usize = 0;

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(count: usize, width: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if width == 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    let run = || (0..count).into_par_iter().map(&f).collect();
    if width == AUTO_WIDTH {
        return run();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(width).build() {
        Ok(pool) => pool.install(run),
        // fall back to the global pool if a dedicated one cannot be spawned
        Err(_) => run(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(count: usize, _width: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

/// Number of workers a given width resolves to.
pub fn effective_width(width: usize) -> usize {
    #[cfg(feature = "parallel")]
    {
        if width == AUTO_WIDTH {
            rayon::current_num_threads()
        } else {
            width
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = width;
        1
    }
}
