//! Index-keyed parallel map.
//!
//! Results are always returned in index order and every item is a pure
//! function of its index, so the output does not depend on the worker count.

/// Evaluates `f(0), …, f(count − 1)`. `workers == 0` uses all cores.
pub fn map_indexed<T, F>(count: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if workers != 1 && count > 1 {
            let run = || (0..count).into_par_iter().map(&f).collect::<Vec<T>>();
            if workers == 0 {
                return run();
            }
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                return pool.install(run);
            }
        }
    }
    let _ = workers;
    (0..count).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let a = map_indexed(1000, 1, |i| i * i);
        let b = map_indexed(1000, 4, |i| i * i);
        let c = map_indexed(1000, 0, |i| i * i);
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}
