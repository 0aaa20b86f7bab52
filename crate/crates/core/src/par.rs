//! Data-parallel iteration helpers.
//!
//! With the `parallel` feature (on by default) these fan work out over a
//! rayon pool; without it they run sequentially with identical results.
//! The `*_seq` variants are always sequential so callers (and benches) can
//! compare the two paths in the same build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving input order in the output.
pub fn map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Map a fallible `f` over `items`. On failure the error from the earliest
/// input (not the first to fail in wall-clock time) is returned, so the
/// outcome does not depend on scheduling.
pub fn try_map<T, U, E, F>(items: Vec<T>, f: F) -> Result<Vec<U>, E>
where
    T: Send,
    U: Send,
    E: Send,
    F: Fn(T) -> Result<U, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        let results: Vec<Result<U, E>> = items.into_par_iter().map(f).collect();
        results.into_iter().collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Sequential counterpart of [`map`], available in every build.
pub fn map_seq<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

/// Sequential counterpart of [`try_map`], available in every build.
pub fn try_map_seq<T, U, E, F>(items: Vec<T>, f: F) -> Result<Vec<U>, E>
where
    F: Fn(T) -> Result<U, E>,
{
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let out = map(vec![3, 1, 2], |x| x * 10);
        assert_eq!(out, vec![30, 10, 20]);
    }

    #[test]
    fn try_map_returns_earliest_error() {
        let out: Result<Vec<i32>, String> = try_map(vec![1, 2, 3, 4], |x| {
            if x % 2 == 0 {
                Err(format!("bad {x}"))
            } else {
                Ok(x)
            }
        });
        assert_eq!(out.unwrap_err(), "bad 2");
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let a = map(items.clone(), |x| x.wrapping_mul(2654435761));
        let b = map_seq(items, |x| x.wrapping_mul(2654435761));
        assert_eq!(a, b);
    }
}
