use contactlab_core::ReplicaExecutor;
use rayon::prelude::*;

/// Runs replica chunks on the rayon thread pool. Results keep chunk order,
/// so estimates are identical to [`contactlab_core::Sequential`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl ReplicaExecutor for Parallel {
    fn map_chunks<T, F>(&self, chunks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..chunks).into_par_iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use contactlab_core::replicas::{accumulate, ReplicaRng};
    use contactlab_core::Sequential;
    use rand::Rng;

    #[test]
    fn matches_sequential() {
        let job = |_: u64, rng: &mut ReplicaRng, out: &mut [f64]| {
            out[0] = rng.random::<f64>();
            out[1] = out[0] * out[0];
            true
        };
        let (a, _) = accumulate(&Parallel, 3, 9, 10_000, 2, job);
        let (b, _) = accumulate(&Sequential, 3, 9, 10_000, 2, job);
        assert_eq!(a, b);
    }
}
