use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::law::{DenseSampler, LatticeSampler};
use super::WalkerError;
use crate::criticality::TransformedModel;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WalkerState {
    /// Point index of a finite space.
    Point(usize),
    /// Unbounded lattice site with a mark.
    Lattice { site: Vec<i64>, mark: usize },
}

/// Piecewise-constant path: `states[k]` is occupied on
/// `[times[k], times[k + 1])`, the last one until `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerPath {
    pub times: Vec<f64>,
    pub states: Vec<WalkerState>,
    pub horizon: f64,
}

impl WalkerPath {
    pub fn jumps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn state_at(&self, t: f64) -> &WalkerState {
        let k = self.times.partition_point(|&s| s <= t);
        &self.states[k.saturating_sub(1)]
    }
}

pub(crate) fn holding<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    if rate > 0.0 {
        let e: f64 = Exp1.sample(rng);
        e / rate
    } else {
        f64::INFINITY
    }
}

/// Walker with holding rate `V(x)` and jump law `b(x,·) m̄ / V(x)`, run to
/// `horizon`.
pub fn simulate_jump<R: Rng + ?Sized>(
    tm: &TransformedModel,
    start: WalkerState,
    horizon: f64,
    rng: &mut R,
) -> Result<WalkerPath, WalkerError> {
    let mut times = alloc::vec![0.0];
    let mut states = alloc::vec![start.clone()];
    match start {
        WalkerState::Point(mut x) => {
            let law = DenseSampler::new(tm)?;
            if x >= law.rates.len() {
                return Err(WalkerError::InvalidStart);
            }
            let mut t = 0.0;
            loop {
                t += holding(law.rates[x], rng);
                if t >= horizon {
                    break;
                }
                x = law.next(x, rng);
                times.push(t);
                states.push(WalkerState::Point(x));
            }
        }
        WalkerState::Lattice { mut site, mut mark } => {
            let law = LatticeSampler::new(tm)?;
            if site.len() != law.dim || mark >= law.n_marks() {
                return Err(WalkerError::InvalidStart);
            }
            let mut t = 0.0;
            loop {
                t += holding(law.rates[mark], rng);
                if t >= horizon {
                    break;
                }
                law.jump(&mut site, &mut mark, rng);
                times.push(t);
                states.push(WalkerState::Lattice {
                    site: site.clone(),
                    mark,
                });
            }
        }
    }
    Ok(WalkerPath { times, states, horizon })
}

/// `∫₀^T f(X_t, Y_t) dt`, summed exactly over the common holding intervals.
pub fn path_integral(
    x: &WalkerPath,
    y: &WalkerPath,
    horizon: f64,
    mut f: impl FnMut(&WalkerState, &WalkerState) -> f64,
) -> f64 {
    let (mut i, mut j) = (0usize, 0usize);
    let mut t = 0.0;
    let mut total = 0.0;
    while t < horizon {
        let nx = x.times.get(i + 1).copied().unwrap_or(f64::INFINITY);
        let ny = y.times.get(j + 1).copied().unwrap_or(f64::INFINITY);
        let next = nx.min(ny).min(horizon);
        total += f(&x.states[i], &y.states[j]) * (next - t);
        t = next;
        if nx <= next {
            i += 1;
        }
        if ny <= next {
            j += 1;
        }
    }
    total
}

/// Jump times of the mark chain started at `s0`, up to `horizon`. Jumps back
/// to the same mark count.
pub fn mark_chain_jumps<R: Rng + ?Sized>(
    law: &LatticeSampler,
    s0: usize,
    horizon: f64,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    out.clear();
    let mut s = s0;
    let mut t = 0.0;
    loop {
        t += holding(law.rates[s], rng);
        if t >= horizon {
            return;
        }
        out.push(t);
        s = law.next_mark(s, rng);
    }
}
