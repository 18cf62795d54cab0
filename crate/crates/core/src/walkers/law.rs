use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use super::WalkerError;
use crate::criticality::{theta_kernel, TransformedModel};

const NORMALIZATION_TOL: f64 = 1e-9;

/// Jump law of one walker on `Z^d × marks`: holding rate `v(s)`, new mark
/// from `Θ(s,·)ν`, displacement `ξ' = ξ − u` with `u ~ α/A`.
#[derive(Debug, Clone)]
pub struct LatticeSampler {
    pub dim: usize,
    offsets: Vec<Vec<i64>>,
    alpha_alias: WeightedAliasIndex<f64>,
    box_radius: i64,
    box_values: Vec<f64>,
    /// `v(s)`.
    pub rates: Vec<f64>,
    mark_alias: Vec<Option<WeightedAliasIndex<f64>>>,
    /// `Q(s,t) / q(s)`, so that `b = α · coupling`.
    coupling: DMatrix<f64>,
    /// `Θ(s,t) ν(t)` rows.
    pub mark_transition: DMatrix<f64>,
}

impl LatticeSampler {
    pub fn new(tm: &TransformedModel) -> Result<Self, WalkerError> {
        let lat = tm.lattice().ok_or(WalkerError::NotLattice)?;
        let marks = tm.marks.as_ref().ok_or(WalkerError::NotLattice)?;
        let theta = theta_kernel(tm).map_err(|_| WalkerError::NotLattice)?;
        for (s, sum) in theta.row_sums().iter().enumerate() {
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(WalkerError::NotNormalized { state: s, mass: *sum });
            }
        }
        let alpha = &lat.alpha;
        let support: Vec<usize> = (0..alpha.values().len()).filter(|&i| alpha.values()[i] > 0.0).collect();
        if support.is_empty() {
            return Err(WalkerError::NotNormalized { state: 0, mass: 0.0 });
        }
        let offsets: Vec<Vec<i64>> = support.iter().map(|&i| alpha.offsets()[i].clone()).collect();
        let weights: Vec<f64> = support.iter().map(|&i| alpha.values()[i]).collect();
        let alpha_alias = WeightedAliasIndex::new(weights).map_err(|_| WalkerError::NotNormalized { state: 0, mass: 0.0 })?;
        let box_radius = alpha.radius();
        let side = (2 * box_radius + 1) as usize;
        let mut box_values = vec![0.0; side.pow(lat.dim as u32)];
        for (u, &v) in alpha.offsets().iter().zip(alpha.values()) {
            if let Some(i) = box_index(u, box_radius) {
                box_values[i] = v;
            }
        }
        let k = marks.q.len();
        let mark_transition = DMatrix::from_fn(k, k, |s, t| theta.theta[(s, t)] * theta.nu[t]);
        let mark_alias = (0..k)
            .map(|s| {
                if k == 1 {
                    None
                } else {
                    let row: Vec<f64> = (0..k).map(|t| mark_transition[(s, t)]).collect();
                    WeightedAliasIndex::new(row).ok()
                }
            })
            .collect();
        let coupling = DMatrix::from_fn(k, k, |s, t| marks.q_kernel[(s, t)] / marks.q[s]);
        Ok(Self {
            dim: lat.dim,
            offsets,
            alpha_alias,
            box_radius,
            box_values,
            rates: marks.v.clone(),
            mark_alias,
            coupling,
            mark_transition,
        })
    }

    /// `max_{s,t} Q(s,t)/q(s)`.
    pub fn coupling_sup(&self) -> f64 {
        self.coupling.max()
    }

    pub fn coupling(&self, s: usize, t: usize) -> f64 {
        self.coupling[(s, t)]
    }

    /// Displacements with `α(u) > 0`.
    pub fn support(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    /// `Σ_u α(u)`.
    pub fn alpha_mass(&self) -> f64 {
        self.box_values.iter().sum()
    }

    pub fn n_marks(&self) -> usize {
        self.rates.len()
    }

    pub fn alpha(&self, z: &[i64]) -> f64 {
        box_index(z, self.box_radius).map_or(0.0, |i| self.box_values[i])
    }

    /// `b((ξ,s), (ξ',t))` with `z = ξ − ξ'`.
    pub fn b(&self, z: &[i64], s: usize, t: usize) -> f64 {
        self.b_signed(z, 1, s, t)
    }

    /// `b` at displacement `sign · z`.
    pub fn b_signed(&self, z: &[i64], sign: i64, s: usize, t: usize) -> f64 {
        let a = box_index_signed(z, sign, self.box_radius).map_or(0.0, |i| self.box_values[i]);
        if a == 0.0 {
            0.0
        } else {
            a * self.coupling[(s, t)]
        }
    }

    pub fn next_mark<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        match &self.mark_alias[s] {
            Some(a) => a.sample(rng),
            None => s,
        }
    }

    pub fn offset<R: Rng + ?Sized>(&self, rng: &mut R) -> &[i64] {
        &self.offsets[self.alpha_alias.sample(rng)]
    }

    /// One jump in place.
    pub fn jump<R: Rng + ?Sized>(&self, pos: &mut [i64], mark: &mut usize, rng: &mut R) {
        let u = self.offset(rng);
        for (p, d) in pos.iter_mut().zip(u) {
            *p -= d;
        }
        *mark = self.next_mark(*mark, rng);
    }
}

fn box_index(z: &[i64], r: i64) -> Option<usize> {
    box_index_signed(z, 1, r)
}

fn box_index_signed(z: &[i64], sign: i64, r: i64) -> Option<usize> {
    let side = 2 * r + 1;
    let mut idx = 0i64;
    for &c in z {
        let c = sign * c;
        if c < -r || c > r {
            return None;
        }
        idx = idx * side + c + r;
    }
    Some(idx as usize)
}

/// Jump law on a finite space: from `x` jump at rate `R(x) = Σ_y w(x,y)`
/// to `y` with probability `w(x,y)/R(x)`, `w = (b + J/Ψ)(x,y) m̄(y)`.
#[derive(Debug, Clone)]
pub struct DenseSampler {
    pub rates: Vec<f64>,
    rows: Vec<Option<WeightedAliasIndex<f64>>>,
}

impl DenseSampler {
    pub fn new(tm: &TransformedModel) -> Result<Self, WalkerError> {
        let d = tm.dense().ok_or(WalkerError::NotDense)?;
        let n = tm.len();
        let out = tm.jump_out();
        let mut rates = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n);
        for x in 0..n {
            let w: Vec<f64> = (0..n)
                .map(|y| (d.b[(x, y)] + d.jump_b.as_ref().map_or(0.0, |j| j[(x, y)])) * tm.mbar[y])
                .collect();
            let total: f64 = w.iter().sum();
            let expected = tm.death[x] + out[x];
            if (total - expected).abs() > NORMALIZATION_TOL * expected.max(1.0) {
                return Err(WalkerError::NotNormalized {
                    state: x,
                    mass: total / expected,
                });
            }
            rates.push(total);
            rows.push(if total > 0.0 { WeightedAliasIndex::new(w).ok() } else { None });
        }
        Ok(Self { rates, rows })
    }

    pub fn next<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        self.rows[x].as_ref().map_or(x, |a| a.sample(rng))
    }
}
