//! Event-driven simulation of the particle system on a finite space and
//! empirical correlation functions.
//!
//! A particle at `x` dies at rate `V(x)`, gives birth at `y` at rate
//! `b(y,x) m̄(y)` and, with a jump kernel, moves to `y` at rate
//! `J(y,x) m(y)`. Events are drawn by thinning: a uniformly chosen
//! particle proposes at the largest per-particle rate and the proposal is
//! split into death, birth, jump or nothing.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::weighted::{WeightedAliasIndex, WeightedTreeIndex};
use rand_distr::{Distribution, Poisson};

use crate::criticality::TransformedModel;
use crate::hierarchy::CorrelationTensor;
use crate::model::Configuration;
use crate::replicas::{accumulate, ReplicaExecutor};
use crate::stats::VecAccumulator;
use crate::walkers::path_holding as holding;

const SIM_DOMAIN: u64 = 0x7369_6d75_0000_0000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulatorError {
    #[error("the simulator needs a finite model")]
    NotDense,
    #[error("configuration refers to point {0} outside the space")]
    UnknownPoint(usize),
    #[error("snapshot times must be sorted and within [0, horizon]")]
    InvalidTimes,
    #[error("{got} usable replicas, at least {need} required")]
    InsufficientReplicas { got: u64, need: u64 },
    #[error("snapshot {0} is missing")]
    MissingSnapshot(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    Birth,
    Death,
    Jump,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    /// Dying particle, parent, or jump origin.
    pub point: usize,
    /// Newborn location or jump destination.
    pub target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub events: Vec<Event>,
    pub snapshots: Vec<(f64, Configuration)>,
    /// Population or event cap hit; the run stopped early.
    pub truncated: bool,
    pub event_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationControls {
    pub population_cap: u64,
    pub event_cap: u64,
    pub record_events: bool,
}

impl Default for SimulationControls {
    fn default() -> Self {
        Self {
            population_cap: 1_000_000,
            event_cap: 1_000_000,
            record_events: true,
        }
    }
}

/// Per-point rates and jump targets of the transformed model.
#[derive(Debug, Clone)]
pub struct ContactLaw {
    death: Vec<f64>,
    birth: Vec<f64>,
    jump: Vec<f64>,
    birth_alias: Vec<Option<WeightedAliasIndex<f64>>>,
    jump_alias: Vec<Option<WeightedAliasIndex<f64>>>,
    omega: f64,
}

impl ContactLaw {
    pub fn new(tm: &TransformedModel) -> Result<Self, SimulatorError> {
        let d = tm.dense().ok_or(SimulatorError::NotDense)?;
        let n = tm.len();
        let column = |m: &nalgebra::DMatrix<f64>, x: usize| -> Vec<f64> { (0..n).map(|y| m[(y, x)] * tm.mbar[y]).collect() };
        let mut birth = Vec::with_capacity(n);
        let mut jump = vec![0.0; n];
        let mut birth_alias = Vec::with_capacity(n);
        let mut jump_alias = vec![None; n];
        for x in 0..n {
            let w = column(&d.b, x);
            birth.push(w.iter().sum());
            birth_alias.push(WeightedAliasIndex::new(w).ok());
            if let Some(j) = &d.jump_b {
                let w = column(j, x);
                jump[x] = w.iter().sum();
                jump_alias[x] = WeightedAliasIndex::new(w).ok();
            }
        }
        let omega = (0..n).map(|x| tm.death[x] + birth[x] + jump[x]).fold(0.0, f64::max);
        Ok(Self {
            death: tm.death.clone(),
            birth,
            jump,
            birth_alias,
            jump_alias,
            omega,
        })
    }

    pub fn len(&self) -> usize {
        self.death.len()
    }

    pub fn is_empty(&self) -> bool {
        self.death.is_empty()
    }

    /// `Σ_y b(y,x) m̄(y)`.
    pub fn birth_rate(&self, x: usize) -> f64 {
        self.birth[x]
    }

    /// `Σ_y J(y,x) m(y)`.
    pub fn jump_rate(&self, x: usize) -> f64 {
        self.jump[x]
    }
}

/// Independent Poisson counts with means `ρ m̄(x)`.
pub fn poisson_configuration<R: Rng + ?Sized>(rho: f64, mbar: &[f64], rng: &mut R) -> Vec<u64> {
    mbar.iter()
        .map(|&m| {
            let mean = rho * m;
            if mean > 0.0 {
                let k: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
                k as u64
            } else {
                0
            }
        })
        .collect()
}

fn check_times(times: &[f64], horizon: f64) -> Result<(), SimulatorError> {
    let ok = times.iter().all(|t| *t >= 0.0 && *t <= horizon) && times.windows(2).all(|w| w[0] <= w[1]);
    if ok && horizon.is_finite() {
        Ok(())
    } else {
        Err(SimulatorError::InvalidTimes)
    }
}

/// Run from the counts `counts` up to `horizon`, calling `snapshot(i, counts)`
/// at each snapshot time. Returns `(events, truncated)`.
fn run<R: Rng + ?Sized>(
    law: &ContactLaw,
    counts: &mut [u64],
    horizon: f64,
    times: &[f64],
    controls: &SimulationControls,
    rng: &mut R,
    mut on_event: impl FnMut(Event),
    mut snapshot: impl FnMut(usize, &[u64]),
) -> (u64, bool) {
    let mut tree = WeightedTreeIndex::new(counts.iter().copied()).expect("valid counts");
    let mut total: u64 = counts.iter().sum();
    let mut t = 0.0;
    let mut next_snap = 0;
    let mut events = 0u64;
    let mut truncated = false;
    let set = |tree: &mut WeightedTreeIndex<u64>, x: usize, c: u64| tree.update(x, c).expect("valid weight");
    loop {
        let dt = if total == 0 { f64::INFINITY } else { holding(total as f64 * law.omega, rng) };
        let next = t + dt;
        while next_snap < times.len() && times[next_snap] < next {
            snapshot(next_snap, counts);
            next_snap += 1;
        }
        if next > horizon {
            break;
        }
        t = next;
        let x = tree.sample(rng);
        let u = rng.random::<f64>() * law.omega;
        let event = if u < law.death[x] {
            counts[x] -= 1;
            total -= 1;
            set(&mut tree, x, counts[x]);
            Some(Event {
                time: t,
                kind: EventKind::Death,
                point: x,
                target: None,
            })
        } else if u < law.death[x] + law.birth[x] {
            let y = law.birth_alias[x].as_ref().expect("positive birth rate").sample(rng);
            counts[y] += 1;
            total += 1;
            set(&mut tree, y, counts[y]);
            Some(Event {
                time: t,
                kind: EventKind::Birth,
                point: x,
                target: Some(y),
            })
        } else if u < law.death[x] + law.birth[x] + law.jump[x] {
            let y = law.jump_alias[x].as_ref().expect("positive jump rate").sample(rng);
            counts[x] -= 1;
            counts[y] += 1;
            set(&mut tree, x, counts[x]);
            set(&mut tree, y, counts[y]);
            Some(Event {
                time: t,
                kind: EventKind::Jump,
                point: x,
                target: Some(y),
            })
        } else {
            None
        };
        if let Some(e) = event {
            events += 1;
            on_event(e);
            if total > controls.population_cap || events >= controls.event_cap {
                truncated = true;
                break;
            }
        }
    }
    (events, truncated)
}

/// Exact simulation from `gamma0` up to `horizon` with snapshots at
/// `snapshot_times` (sorted, within `[0, horizon]`).
pub fn simulate_contact<R: Rng + ?Sized>(
    tm: &TransformedModel,
    gamma0: &Configuration,
    horizon: f64,
    snapshot_times: &[f64],
    controls: &SimulationControls,
    rng: &mut R,
) -> Result<EventLog, SimulatorError> {
    let law = ContactLaw::new(tm)?;
    check_times(snapshot_times, horizon)?;
    if let Some((x, _)) = gamma0.iter().find(|(x, _)| *x >= law.len()) {
        return Err(SimulatorError::UnknownPoint(x));
    }
    let mut counts = gamma0.to_counts(law.len());
    let mut log = Vec::new();
    let mut snapshots = Vec::with_capacity(snapshot_times.len());
    let (event_count, truncated) = run(
        &law,
        &mut counts,
        horizon,
        snapshot_times,
        controls,
        rng,
        |e| {
            if controls.record_events {
                log.push(e)
            }
        },
        |i, c| snapshots.push((snapshot_times[i], Configuration::from_counts(c))),
    );
    Ok(EventLog {
        events: log,
        snapshots,
        truncated,
        event_count,
    })
}

/// Empirical correlation function of one order.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub order: usize,
    /// Densities with respect to `m̄`.
    pub values: CorrelationTensor,
    pub stderr: CorrelationTensor,
    pub replicas: u64,
    /// Replicas left out because they were truncated.
    pub truncated: u64,
}

/// Streams counts into factorial-moment estimates of orders `1..=n_max`.
#[derive(Debug, Clone)]
pub struct CorrelationAccumulator {
    n_max: usize,
    mbar: Vec<f64>,
    acc: VecAccumulator,
}

fn factorial_sample(n_max: usize, mbar: &[f64], counts: &[u64], out: &mut [f64]) {
    let p = mbar.len();
    let mut offset = 0;
    let mut idx = vec![0usize; n_max];
    let mut used = vec![0u64; p];
    for n in 1..=n_max {
        let len = p.pow(n as u32);
        for flat in 0..len {
            let mut f = flat;
            for i in (0..n).rev() {
                idx[i] = f % p;
                f /= p;
            }
            let mut v = 1.0;
            for &x in &idx[..n] {
                let c = counts[x];
                let k = used[x];
                v *= if c > k { (c - k) as f64 } else { 0.0 } / mbar[x];
                used[x] += 1;
            }
            for &x in &idx[..n] {
                used[x] = 0;
            }
            out[offset + flat] = v;
        }
        offset += len;
    }
}

fn width(n_max: usize, p: usize) -> usize {
    (1..=n_max).map(|n| p.pow(n as u32)).sum()
}

impl CorrelationAccumulator {
    pub fn new(n_max: usize, mbar: &[f64]) -> Self {
        Self {
            n_max,
            mbar: mbar.to_vec(),
            acc: VecAccumulator::new(width(n_max, mbar.len())),
        }
    }

    pub fn push(&mut self, counts: &[u64]) {
        let mut buf = vec![0.0; self.acc.width()];
        factorial_sample(self.n_max, &self.mbar, counts, &mut buf);
        self.acc.push(&buf);
    }

    pub fn count(&self) -> u64 {
        self.acc.count
    }

    pub fn finish(&self, truncated: u64) -> Vec<MomentEstimate> {
        split_estimates(&self.acc, 0, self.n_max, self.mbar.len(), truncated)
    }
}

fn split_estimates(acc: &VecAccumulator, start: usize, n_max: usize, p: usize, truncated: u64) -> Vec<MomentEstimate> {
    let mut offset = start;
    (1..=n_max)
        .map(|n| {
            let len = p.pow(n as u32);
            let mut values = CorrelationTensor::zeros(n, p);
            let mut stderr = CorrelationTensor::zeros(n, p);
            for i in 0..len {
                values.values_mut()[i] = acc.mean(offset + i);
                stderr.values_mut()[i] = acc.stderr(offset + i);
            }
            offset += len;
            MomentEstimate {
                order: n,
                values,
                stderr,
                replicas: acc.count,
                truncated,
            }
        })
        .collect()
}

pub const MIN_REPLICAS: u64 = 100;

/// Factorial-moment estimates at snapshot `index` of every log. Truncated
/// logs are left out and counted.
pub fn empirical_correlations(
    logs: &[EventLog],
    mbar: &[f64],
    index: usize,
    n: usize,
) -> Result<Vec<MomentEstimate>, SimulatorError> {
    let mut acc = CorrelationAccumulator::new(n, mbar);
    let mut truncated = 0;
    for log in logs {
        if log.truncated {
            truncated += 1;
            continue;
        }
        let (_, c) = log.snapshots.get(index).ok_or(SimulatorError::MissingSnapshot(index))?;
        acc.push(&c.to_counts(mbar.len()));
    }
    if acc.count() < MIN_REPLICAS {
        return Err(SimulatorError::InsufficientReplicas {
            got: acc.count(),
            need: MIN_REPLICAS,
        });
    }
    Ok(acc.finish(truncated))
}

/// Replicas from Poisson(`ρ m̄`) initial data, reduced on the fly.
/// `result[i]` holds orders `1..=n_max` at `times[i]`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_moments<E: ReplicaExecutor + ?Sized>(
    tm: &TransformedModel,
    rho: f64,
    times: &[f64],
    n_max: usize,
    replicas: u64,
    controls: &SimulationControls,
    exec: &E,
    seed: u64,
) -> Result<Vec<Vec<MomentEstimate>>, SimulatorError> {
    let law = ContactLaw::new(tm)?;
    let horizon = times.last().copied().unwrap_or(0.0);
    check_times(times, horizon)?;
    let p = law.len();
    let w = width(n_max, p);
    let (acc, truncated) = accumulate(exec, seed, SIM_DOMAIN, replicas, w * times.len(), |_, rng, buf| {
        let mut counts = poisson_configuration(rho, &tm.mbar, rng);
        let (_, truncated) = run(
            &law,
            &mut counts,
            horizon,
            times,
            controls,
            rng,
            |_| {},
            |i, c| factorial_sample(n_max, &tm.mbar, c, &mut buf[i * w..(i + 1) * w]),
        );
        !truncated
    });
    if acc.count < MIN_REPLICAS {
        return Err(SimulatorError::InsufficientReplicas {
            got: acc.count,
            need: MIN_REPLICAS,
        });
    }
    Ok((0..times.len()).map(|i| split_estimates(&acc, i * w, n_max, p, truncated)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_space, SpaceSpec};
    use crate::replicas::{replica_rng, Sequential};
    use nalgebra::DMatrix;

    fn model(b: DMatrix<f64>, death: Vec<f64>) -> TransformedModel {
        let n = death.len();
        TransformedModel::from_dense(build_space(SpaceSpec::finite(vec![1.0; n])).unwrap(), b, death, None)
    }

    #[test]
    fn single_particle_without_births_dies_once() {
        let tm = model(DMatrix::zeros(2, 2), vec![1.0, 1.0]);
        let mut rng = replica_rng(1, 0, 0);
        let log = simulate_contact(
            &tm,
            &Configuration::from_counts(&[1, 0]),
            100.0,
            &[],
            &SimulationControls::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(log.events.len(), 1);
        assert_eq!(log.events[0].kind, EventKind::Death);
    }

    #[test]
    fn pure_death_extinction_time() {
        let tm = model(DMatrix::zeros(1, 1), vec![1.0]);
        let n = 20000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for r in 0..n {
            let mut rng = replica_rng(2, 0, r);
            let log = simulate_contact(
                &tm,
                &Configuration::from_counts(&[1]),
                1e9,
                &[],
                &SimulationControls::default(),
                &mut rng,
            )
            .unwrap();
            let t = log.events[0].time;
            sum += t;
            sumsq += t * t;
        }
        let mean = sum / n as f64;
        let se = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se);
    }

    #[test]
    fn deterministic_particle_moments() {
        let tm = model(DMatrix::zeros(2, 2), vec![1.0, 1.0]);
        let logs: Vec<EventLog> = (0..100)
            .map(|r| {
                let mut rng = replica_rng(3, 0, r);
                simulate_contact(
                    &tm,
                    &Configuration::from_counts(&[1, 0]),
                    1.0,
                    &[0.0],
                    &SimulationControls::default(),
                    &mut rng,
                )
                .unwrap()
            })
            .collect();
        let m = empirical_correlations(&logs, &tm.mbar, 0, 2).unwrap();
        assert_eq!(m[0].values.get(&[0]), 1.0);
        assert_eq!(m[1].values.get(&[0, 0]), 0.0);
        assert!(empirical_correlations(&logs[..50], &tm.mbar, 0, 1).is_err());
    }

    #[test]
    fn falling_factorials() {
        let mut out = vec![0.0; 2 + 4];
        factorial_sample(2, &[1.0, 0.5], &[3, 2], &mut out);
        assert_eq!(&out[..2], &[3.0, 4.0]);
        assert_eq!(out[2], 6.0);
        assert_eq!(out[3], 12.0);
        assert_eq!(out[5], 8.0);
    }

    #[test]
    fn poisson_start_moments() {
        let tm = model(DMatrix::from_element(3, 3, 1.0 / 3.0), vec![1.0; 3]);
        let r = simulate_moments(&tm, 0.5, &[0.0], 2, 20000, &SimulationControls::default(), &Sequential, 4).unwrap();
        for (n, want) in [(0usize, 0.5), (1, 0.25)] {
            let e = &r[0][n];
            for (v, s) in e.values.values().iter().zip(e.stderr.values()) {
                assert!((v - want).abs() < 4.0 * s, "{v} {s}");
            }
        }
    }

    #[test]
    fn critical_single_point_keeps_mean() {
        let tm = model(DMatrix::from_element(1, 1, 1.0), vec![1.0]);
        let r = simulate_moments(&tm, 2.0, &[0.5, 1.0, 2.0], 1, 20000, &SimulationControls::default(), &Sequential, 5)
            .unwrap();
        for row in &r {
            let e = &row[0];
            assert!((e.values.get(&[0]) - 2.0).abs() < 3.5 * e.stderr.get(&[0]));
        }
    }
}
