//! Thin fan-out helper. With the `parallel` feature (default) work runs on a
//! rayon pool sized by the caller; without it, or when `threads` is 1, the
//! same closure runs sequentially. Output order always matches input order.

pub(crate) fn map_ordered<T, U, F>(items: Vec<T>, threads: usize, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if threads > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("failed to build worker pool");
            return pool.install(|| {
                use rayon::prelude::*;
                items.into_par_iter().map(&f).collect()
            });
        }
    }
    let _ = threads;
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let xs: Vec<u64> = (0..500).collect();
        let squared = map_ordered(xs.clone(), 8, |x| x * x);
        assert_eq!(squared, xs.iter().map(|x| x * x).collect::<Vec<_>>());
    }

    #[test]
    fn sequential_path_matches() {
        let xs: Vec<u64> = (0..100).collect();
        assert_eq!(map_ordered(xs.clone(), 8, |x| x + 1), map_ordered(xs, 1, |x| x + 1));
    }
}
