//! Index-parallel map used by the experiment harness and Monte Carlo checks.
//!
//! With the `parallel` feature (default) [`Parallelism::Rayon`] fans work out
//! over the rayon pool. Without it every mode runs sequentially. Results are
//! always returned in index order, so callers that seed each item from its
//! index get identical output either way.

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    #[default]
    Rayon,
}

impl Parallelism {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Rayon
    }
}

pub use internal::map_indexed;

#[cfg(feature = "parallel")]
mod internal {
    use super::Parallelism;
    use rayon::prelude::*;

    pub fn map_indexed<T, F>(n: usize, mode: Parallelism, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match mode {
            Parallelism::Rayon => (0..n).into_par_iter().map(f).collect(),
            Parallelism::Sequential => (0..n).map(f).collect(),
        }
    }
}

#[cfg(not(feature = "parallel"))]
mod internal {
    use super::Parallelism;

    pub fn map_indexed<T, F>(n: usize, _mode: Parallelism, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = map_indexed(100, Parallelism::Sequential, |i| i * i);
        let par = map_indexed(100, Parallelism::Rayon, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 49);
    }
}
