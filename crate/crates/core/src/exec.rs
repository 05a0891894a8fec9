//! Ordered data-parallel map used by the explorer and the admissibility
//! checker. With the `parallel` feature off, everything runs sequentially.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Parallel,
    Sequential,
}

/// Maps `f` over `items`, keeping input order in the result.
pub fn map_ordered<T, R, F>(mode: Mode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Mode::Parallel if items.len() > 1 => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Maps `f` over `0..n` in chunks, keeping order.
pub fn map_range<R, F>(mode: Mode, n: u64, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u64) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Mode::Parallel if n > 1 => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree_and_keep_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map_ordered(Mode::Parallel, &xs, |x| x * x);
        let b = map_ordered(Mode::Sequential, &xs, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(map_range(Mode::Parallel, 50, |i| i + 1), (1..=50).collect::<Vec<_>>());
    }
}
