//! Deterministic replica scheduling for Monte Carlo estimators.
//!
//! Replicas are grouped into fixed chunks of [`CHUNK`]. Each chunk is
//! accumulated sequentially and chunk results are merged pairwise in chunk
//! order, so results do not depend on how many workers ran the chunks.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::stats::{merge_pairwise, VecAccumulator};

pub const CHUNK: u64 = 1024;

pub type ReplicaRng = ChaCha8Rng;

/// Runs independent chunk jobs, possibly in parallel. Output order must
/// match chunk order.
pub trait ReplicaExecutor: Sync {
    fn map_chunks<T, F>(&self, chunks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ReplicaExecutor for Sequential {
    fn map_chunks<T, F>(&self, chunks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..chunks).map(f).collect()
    }
}

/// Stream for one replica: key from `(seed, domain)`, stream id `replica`.
pub fn replica_rng(seed: u64, domain: u64, replica: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replica);
    rng
}

/// Accumulate `width` values per replica. `f` fills the buffer and returns
/// `false` to drop the replica (it is counted in the second return value).
pub fn accumulate<E, F>(
    exec: &E,
    seed: u64,
    domain: u64,
    replicas: u64,
    width: usize,
    f: F,
) -> (VecAccumulator, u64)
where
    E: ReplicaExecutor + ?Sized,
    F: Fn(u64, &mut ChaCha8Rng, &mut [f64]) -> bool + Sync + Send,
{
    let chunks = replicas.div_ceil(CHUNK) as usize;
    let parts = exec.map_chunks(chunks, |c| {
        let mut acc = VecAccumulator::new(width);
        let mut dropped = 0u64;
        let mut buf = alloc::vec![0.0; width];
        let start = c as u64 * CHUNK;
        let end = (start + CHUNK).min(replicas);
        for r in start..end {
            let mut rng = replica_rng(seed, domain, r);
            buf.iter_mut().for_each(|v| *v = 0.0);
            if f(r, &mut rng, &mut buf) {
                acc.push(&buf);
            } else {
                dropped += 1;
            }
        }
        (acc, dropped)
    });
    let dropped = parts.iter().map(|p| p.1).sum();
    let accs: Vec<VecAccumulator> = parts.into_iter().map(|p| p.0).collect();
    (merge_pairwise(&accs, width), dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    struct Reversed;

    impl ReplicaExecutor for Reversed {
        fn map_chunks<T, F>(&self, chunks: usize, f: F) -> Vec<T>
        where
            T: Send,
            F: Fn(usize) -> T + Sync + Send,
        {
            let mut out: Vec<(usize, T)> = (0..chunks).rev().map(|c| (c, f(c))).collect();
            out.sort_by_key(|p| p.0);
            out.into_iter().map(|p| p.1).collect()
        }
    }

    #[test]
    fn execution_order_does_not_change_result() {
        let job = |_: u64, rng: &mut ChaCha8Rng, out: &mut [f64]| {
            out[0] = rng.random::<f64>();
            true
        };
        let (a, _) = accumulate(&Sequential, 7, 1, 5000, 1, job);
        let (b, _) = accumulate(&Reversed, 7, 1, 5000, 1, job);
        assert_eq!(a, b);
        assert_eq!(a.count, 5000);
    }

    #[test]
    fn streams_differ() {
        let x: u64 = replica_rng(1, 0, 0).random();
        let y: u64 = replica_rng(1, 0, 1).random();
        let z: u64 = replica_rng(1, 1, 0).random();
        assert!(x != y && x != z);
    }
}
