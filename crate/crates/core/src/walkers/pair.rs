use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use super::convolution::{power_tables, LatticeDensity};
use super::law::LatticeSampler;
use super::path::holding;
use super::WalkerError;
use crate::criticality::TransformedModel;
use crate::hierarchy::{integrate_semigroup, CorrelationTensor, HierarchyError, Semigroup, StationaryControls};
use crate::replicas::{accumulate, ReplicaExecutor};

const PAIR_DOMAIN: u64 = 0x7061_6972_0000_0000;
const SUFFICIENT_DOMAIN: u64 = 0x7375_6666_0000_0000;

/// Initial pair `X₀ = (ξ, s_x)`, `Y₀ = (ξ − displacement, s_y)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PairStart {
    /// `ξ_X − ξ_Y`.
    pub displacement: Vec<i64>,
    pub mark_x: usize,
    pub mark_y: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairFunctional {
    /// `b(X_t, Y_t)`.
    Forward,
    /// `b(X_t, Y_t) + b(Y_t, X_t)`.
    Symmetrized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `sup_{x,y} ∫ E_{x,y} b(X_t, Y_t) dt`.
    Full,
    /// `∫ sup_{x,y} E_x b(X_t, y) dt`.
    Sufficient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransienceControls {
    pub horizon: f64,
    pub replicas: u64,
    /// Checkpoints per decade of the running integral.
    pub per_decade: usize,
    /// Decades below the horizon that carry checkpoints.
    pub decades: usize,
    pub functional: PairFunctional,
    /// Jumps whose displacement is averaged out analytically in the
    /// sufficient variant.
    pub regular_terms: usize,
}

impl Default for TransienceControls {
    fn default() -> Self {
        Self {
            horizon: 1000.0,
            replicas: 100_000,
            per_decade: 8,
            decades: 4,
            functional: PairFunctional::Forward,
            regular_terms: 16,
        }
    }
}

/// `T · 10^{(j − n)/per_decade}`, `j = 0..=n`, `n = per_decade · decades`.
pub fn checkpoint_grid(horizon: f64, per_decade: usize, decades: usize) -> Vec<f64> {
    let n = per_decade * decades;
    (0..=n)
        .map(|j| {
            if j == n {
                horizon
            } else {
                horizon * Float::powf(10.0, (j as f64 - n as f64) / per_decade as f64)
            }
        })
        .collect()
}

/// Running integral `∫₀^{t_j} F(X_t, Y_t) dt` of one replica at every
/// checkpoint, exact over holding intervals.
pub fn pair_running_integrals<R: Rng + ?Sized>(
    law: &LatticeSampler,
    start: &PairStart,
    checkpoints: &[f64],
    functional: PairFunctional,
    rng: &mut R,
    out: &mut [f64],
) {
    let mut z = start.displacement.clone();
    let (mut sx, mut sy) = (start.mark_x, start.mark_y);
    let value = |z: &[i64], sx: usize, sy: usize| match functional {
        PairFunctional::Forward => law.b(z, sx, sy),
        PairFunctional::Symmetrized => law.b(z, sx, sy) + law.b_signed(z, -1, sy, sx),
    };
    let mut t = 0.0;
    let mut acc = 0.0;
    let mut j = 0;
    while j < checkpoints.len() {
        let f = value(&z, sx, sy);
        let rate = law.rates[sx] + law.rates[sy];
        let next = t + holding(rate, rng);
        while j < checkpoints.len() && checkpoints[j] <= next {
            out[j] = acc + f * (checkpoints[j] - t);
            debug_assert!(j == 0 || out[j] >= out[j - 1]);
            j += 1;
        }
        acc += f * (next - t);
        t = next;
        if rng.random::<f64>() * rate < law.rates[sx] {
            let u = law.offset(rng);
            z.iter_mut().zip(u).for_each(|(a, b)| *a -= b);
            sx = law.next_mark(sx, rng);
        } else {
            let u = law.offset(rng);
            z.iter_mut().zip(u).for_each(|(a, b)| *a += b);
            sy = law.next_mark(sy, rng);
        }
    }
}

/// Replica averages for one start pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEstimate {
    pub start: PairStart,
    pub checkpoints: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `I(T) + κ (I(T) − I(T/10))` with the `t^{1−d/2}` tail law.
    pub extrapolated: f64,
    pub extrapolated_stderr: f64,
    /// Free fit of the integrand decay exponent over the last two decades.
    pub integrand_exponent: f64,
    /// `log₁₀ (I(T) / I(T/10))`.
    pub growth_exponent: f64,
    pub converged: bool,
}

/// Tail factor `κ` with `∫_T^∞ c t^{−p} dt = κ ∫_{T/10}^T c t^{−p} dt`.
fn tail_factor(horizon: f64, p: f64) -> f64 {
    if p <= 1.0 {
        return 0.0;
    }
    let e = 1.0 - p;
    let hi = Float::powf(horizon, e);
    hi / (Float::powf(horizon / 10.0, e) - hi)
}

fn check_start(law: &LatticeSampler, s: &PairStart) -> Result<(), WalkerError> {
    if s.displacement.len() != law.dim || s.mark_x >= law.n_marks() || s.mark_y >= law.n_marks() {
        return Err(WalkerError::InvalidStart);
    }
    Ok(())
}

fn check_controls(c: &TransienceControls) -> Result<(), WalkerError> {
    if !(c.horizon > 0.0 && c.horizon.is_finite()) || c.per_decade == 0 || c.decades < 2 || c.replicas < 2 {
        return Err(WalkerError::InvalidGrid("need horizon > 0, two decades and two replicas"));
    }
    Ok(())
}

/// Two independent walkers from each start pair.
pub fn estimate_pairs<E: ReplicaExecutor + ?Sized>(
    tm: &TransformedModel,
    starts: &[PairStart],
    controls: &TransienceControls,
    exec: &E,
    seed: u64,
) -> Result<Vec<PairEstimate>, WalkerError> {
    check_controls(controls)?;
    let law = LatticeSampler::new(tm)?;
    for s in starts {
        check_start(&law, s)?;
    }
    let cps = checkpoint_grid(controls.horizon, controls.per_decade, controls.decades);
    let n = cps.len();
    let last = n - 1;
    let i10 = last - controls.per_decade;
    let i100 = last - 2 * controls.per_decade;
    let p = law.dim as f64 / 2.0;
    let kappa = tail_factor(controls.horizon, p);
    let mut out = Vec::with_capacity(starts.len());
    for (idx, start) in starts.iter().enumerate() {
        let (acc, _) = accumulate(exec, seed, PAIR_DOMAIN + idx as u64, controls.replicas, n + 1, |_, rng, buf| {
            pair_running_integrals(&law, start, &cps, controls.functional, rng, &mut buf[..n]);
            buf[n] = buf[last] + kappa * (buf[last] - buf[i10]);
            true
        });
        let mean = acc.means();
        let stderr = acc.stderrs();
        let d1 = mean[i10] - mean[i100];
        let d2 = mean[last] - mean[i10];
        let integrand_exponent = if d2 <= 0.0 {
            f64::NEG_INFINITY
        } else if d1 <= 0.0 {
            f64::INFINITY
        } else {
            Float::log10(d2 / d1) - 1.0
        };
        let growth_exponent = if mean[last] <= 0.0 {
            0.0
        } else {
            Float::log10(mean[last] / mean[i10])
        };
        out.push(PairEstimate {
            start: start.clone(),
            checkpoints: cps.clone(),
            extrapolated: mean[n],
            extrapolated_stderr: stderr[n],
            mean: mean[..n].to_vec(),
            stderr: stderr[..n].to_vec(),
            integrand_exponent,
            growth_exponent,
            converged: p > 1.0 && integrand_exponent <= -1.1,
        });
    }
    Ok(out)
}

/// Displacements in `supp α ∪ −supp α` times all mark pairs. For a
/// translation-invariant kernel the Green potential of `b` is maximal on
/// the support of `b`, so this grid carries the supremum.
pub fn default_grid(tm: &TransformedModel) -> Result<Vec<PairStart>, WalkerError> {
    let law = LatticeSampler::new(tm)?;
    let mut disp: Vec<Vec<i64>> = Vec::new();
    for u in law.support() {
        disp.push(u.clone());
        disp.push(u.iter().map(|c| -c).collect());
    }
    disp.sort();
    disp.dedup();
    let k = law.n_marks();
    let mut grid = Vec::with_capacity(disp.len() * k * k);
    for d in &disp {
        for sx in 0..k {
            for sy in 0..k {
                grid.push(PairStart {
                    displacement: d.clone(),
                    mark_x: sx,
                    mark_y: sy,
                });
            }
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransienceReport {
    pub variant: Variant,
    /// Maximum over the grid of the extrapolated integral plus three
    /// standard errors.
    pub h_hat: f64,
    pub stderr: f64,
    /// Free-fit integrand exponent at the maximizing start.
    pub tail_exponent_fit: f64,
    /// Largest `log₁₀ (I(T) / I(T/10))` over the grid.
    pub growth_exponent: f64,
    pub horizon: f64,
    pub converged: bool,
    pub replicas: u64,
    /// Index into `pairs` of the maximizing start.
    pub argmax: usize,
    pub pairs: Vec<PairEstimate>,
    /// `(t, integral)` curve of the maximizing start or, for the sufficient
    /// variant, `(t, sup integrand)`.
    pub curve: Vec<(f64, f64)>,
}

/// Estimate `H`. Finite models are integrated exactly; lattice models use
/// two-walker Monte Carlo over `grid` (default [`default_grid`]).
pub fn estimate_h<E: ReplicaExecutor + ?Sized>(
    tm: &TransformedModel,
    grid: Option<&[PairStart]>,
    controls: &TransienceControls,
    exec: &E,
    seed: u64,
) -> Result<TransienceReport, WalkerError> {
    if tm.dense().is_some() {
        return estimate_h_dense(tm, &StationaryControls::default());
    }
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned = default_grid(tm)?;
            &owned
        }
    };
    if grid.is_empty() {
        return Err(WalkerError::InvalidGrid("empty start grid"));
    }
    let pairs = estimate_pairs(tm, grid, controls, exec, seed)?;
    let mut argmax = 0;
    let mut h_hat = f64::NEG_INFINITY;
    for (i, p) in pairs.iter().enumerate() {
        let v = p.extrapolated + 3.0 * p.extrapolated_stderr;
        if v > h_hat {
            h_hat = v;
            argmax = i;
        }
    }
    let best = &pairs[argmax];
    Ok(TransienceReport {
        variant: Variant::Full,
        h_hat: h_hat.max(0.0),
        stderr: best.extrapolated_stderr,
        tail_exponent_fit: best.integrand_exponent,
        growth_exponent: pairs.iter().map(|p| p.growth_exponent).fold(f64::NEG_INFINITY, f64::max),
        horizon: controls.horizon,
        converged: pairs.iter().all(|p| p.converged),
        replicas: controls.replicas,
        argmax,
        curve: best.checkpoints.iter().copied().zip(best.mean.iter().copied()).collect(),
        pairs,
    })
}

/// `max_{x,y} ∫₀^∞ (e^{tG} ⊗ e^{tG} b)(x,y) dt` on a finite model.
/// A recurrent model is reported as not converged with `H = ∞`.
pub fn estimate_h_dense(tm: &TransformedModel, controls: &StationaryControls) -> Result<TransienceReport, WalkerError> {
    let d = tm.dense().ok_or(WalkerError::NotDense)?;
    let sg = Semigroup::new(tm)?;
    let f = CorrelationTensor::from_fn(2, tm.len(), |i| d.b[(i[0], i[1])]);
    let report = |h_hat, tail, growth, horizon, converged, argmax| TransienceReport {
        variant: Variant::Full,
        h_hat,
        stderr: 0.0,
        tail_exponent_fit: tail,
        growth_exponent: growth,
        horizon,
        converged,
        replicas: 0,
        argmax,
        pairs: Vec::new(),
        curve: Vec::new(),
    };
    match integrate_semigroup(&sg, &f, controls) {
        Ok((k, horizon)) => {
            let argmax = (0..k.len()).max_by(|&a, &b| k.values()[a].total_cmp(&k.values()[b])).unwrap_or(0);
            Ok(report(k.max().max(0.0), f64::NEG_INFINITY, 0.0, horizon, true, argmax))
        }
        Err(HierarchyError::Divergence(diag)) => {
            let slope = if diag.integrand_three_decades_earlier > 0.0 {
                Float::log10(diag.integrand / diag.integrand_three_decades_earlier) / 3.0
            } else {
                0.0
            };
            Ok(report(f64::INFINITY, slope, 1.0 + slope, diag.time, false, 0))
        }
        Err(e) => Err(e.into()),
    }
}

struct SingleWalk {
    times: Vec<f64>,
    positions: Vec<i64>,
    marks: Vec<usize>,
}

impl SingleWalk {
    fn run<R: Rng + ?Sized>(&mut self, law: &LatticeSampler, s0: usize, horizon: f64, rng: &mut R) {
        self.times.clear();
        self.positions.clear();
        self.marks.clear();
        let dim = law.dim;
        self.positions.extend(core::iter::repeat_n(0, dim));
        self.marks.push(s0);
        let mut t = 0.0;
        let mut s = s0;
        loop {
            t += holding(law.rates[s], rng);
            if t > horizon {
                return;
            }
            let base = self.positions.len() - dim;
            let u = law.offset(rng);
            for (k, &uk) in u.iter().enumerate() {
                let p = self.positions[base + k] - uk;
                self.positions.push(p);
            }
            s = law.next_mark(s, rng);
            self.times.push(t);
            self.marks.push(s);
        }
    }

    /// Jumps made by time `t`.
    fn jumps_by(&self, t: f64) -> usize {
        self.times.partition_point(|&u| u <= t)
    }

    fn position(&self, n: usize, dim: usize) -> &[i64] {
        &self.positions[n * dim..(n + 1) * dim]
    }
}

/// Conditional mean of `α(ξ(t) − ξ₁)` given the walk up to `n − m` jumps,
/// where `m = min(n, M)` and the last `m` displacements are summed out.
/// Zero when `n = 0`; the no-jump part is handled exactly by the caller.
fn regular_alpha(
    walk: &SingleWalk,
    n: usize,
    tables: &[LatticeDensity],
    alpha_mass: f64,
    target: &[i64],
    scratch: &mut [i64],
) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let dim = scratch.len();
    let m = n.min(tables.len() - 2);
    let p = walk.position(n - m, dim);
    for k in 0..dim {
        scratch[k] = p[k] - target[k];
    }
    alpha_mass * tables[m + 1].get(scratch)
}

pub(super) struct RegularEngine<'a> {
    pub law: &'a LatticeSampler,
    pub tables: Vec<LatticeDensity>,
    pub alpha_mass: f64,
}

impl<'a> RegularEngine<'a> {
    pub fn new(law: &'a LatticeSampler, tm: &TransformedModel, regular_terms: usize) -> Result<Self, WalkerError> {
        let lat = tm.lattice().ok_or(WalkerError::NotLattice)?;
        Ok(Self {
            law,
            tables: power_tables(&lat.alpha, regular_terms.max(1) + 1),
            alpha_mass: lat.alpha.mass(),
        })
    }

    /// For each time and target `(ξ₁, s₁)`, write the regular parts of
    /// `α(ξ(t) − ξ₁)` and `b((ξ(t), s(t)), (ξ₁, s₁))` for a walker from
    /// `(0, s0)`. Layout: `out[(i * targets + j) * 2 + {0,1}]`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        s0: usize,
        times: &[f64],
        targets: &[(Vec<i64>, usize)],
        rng: &mut R,
        out: &mut [f64],
    ) {
        let mut walk = SingleWalk {
            times: Vec::new(),
            positions: Vec::new(),
            marks: Vec::new(),
        };
        let horizon = times.iter().copied().fold(0.0, f64::max);
        walk.run(self.law, s0, horizon, rng);
        let mut scratch = vec![0i64; self.law.dim];
        for (i, &t) in times.iter().enumerate() {
            let n = walk.jumps_by(t);
            let s = walk.marks[n];
            for (j, (xi1, s1)) in targets.iter().enumerate() {
                let a = regular_alpha(&walk, n, &self.tables, self.alpha_mass, xi1, &mut scratch);
                let o = (i * targets.len() + j) * 2;
                out[o] = a;
                out[o + 1] = a * self.law.coupling(s, *s1);
            }
        }
    }

    /// `e^{−v(s₀)t} α(−ξ₁)` and its `b` counterpart.
    pub fn singular(&self, s0: usize, t: f64, xi1: &[i64], s1: usize) -> (f64, f64) {
        let neg: Vec<i64> = xi1.iter().map(|c| -c).collect();
        let a = Float::exp(-self.law.rates[s0] * t) * self.law.alpha(&neg);
        (a, a * self.law.coupling(s0, s1))
    }
}

/// Sufficient-condition variant: `∫₀^∞ sup_{s₀, ξ₁, s₁} E_{(0,s₀)} b(X_t, (ξ₁,s₁)) dt`.
///
/// Targets range over the box of twice the stencil radius. The last
/// `regular_terms` jumps are averaged analytically. The integral is a
/// trapezoid rule on a log grid plus a `t^{−d/2}` tail; its standard error
/// treats grid points as independent.
pub fn estimate_h_sufficient<E: ReplicaExecutor + ?Sized>(
    tm: &TransformedModel,
    controls: &TransienceControls,
    exec: &E,
    seed: u64,
) -> Result<TransienceReport, WalkerError> {
    check_controls(controls)?;
    let law = LatticeSampler::new(tm)?;
    let engine = RegularEngine::new(&law, tm, controls.regular_terms)?;
    let dim = law.dim;
    let k = law.n_marks();
    let r = 2 * law.support().iter().flatten().map(|c| c.abs()).max().unwrap_or(0);
    let side = 2 * r + 1;
    let mut targets = Vec::new();
    for flat in 0..side.pow(dim as u32) {
        let mut w = vec![0i64; dim];
        let mut f = flat;
        for c in w.iter_mut().rev() {
            *c = f % side - r;
            f /= side;
        }
        for s1 in 0..k {
            targets.push((w.clone(), s1));
        }
    }
    let mut times = vec![0.0];
    times.extend(checkpoint_grid(controls.horizon, 2 * controls.per_decade, controls.decades + 2));
    let width = times.len() * targets.len() * 2;
    let mut sup = vec![0.0f64; times.len()];
    let mut sup_se = vec![0.0f64; times.len()];
    for s0 in 0..k {
        let (acc, _) = accumulate(exec, seed, SUFFICIENT_DOMAIN + s0 as u64, controls.replicas, width, |_, rng, buf| {
            engine.sample(s0, &times, &targets, rng, buf);
            true
        });
        for (i, &t) in times.iter().enumerate() {
            for (j, (xi1, s1)) in targets.iter().enumerate() {
                let o = (i * targets.len() + j) * 2 + 1;
                let v = acc.mean(o) + engine.singular(s0, t, xi1, *s1).1;
                if v > sup[i] {
                    sup[i] = v;
                    sup_se[i] = acc.stderr(o);
                }
            }
        }
    }
    let mut integral = 0.0;
    let mut var = 0.0;
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        integral += 0.5 * h * (sup[i] + sup[i - 1]);
        var += Float::powi(0.5 * h, 2) * (sup_se[i] * sup_se[i] + sup_se[i - 1] * sup_se[i - 1]);
    }
    let p = dim as f64 / 2.0;
    let last = times.len() - 1;
    let i10 = last - 2 * controls.per_decade;
    let exponent = if sup[last] > 0.0 && sup[i10] > 0.0 {
        Float::log10(sup[last] / sup[i10])
    } else {
        f64::NEG_INFINITY
    };
    let converged = p > 1.0 && exponent <= -1.1;
    if p > 1.0 {
        integral += sup[last] * controls.horizon / (p - 1.0);
    }
    let stderr = Float::sqrt(var);
    Ok(TransienceReport {
        variant: Variant::Sufficient,
        h_hat: integral + 3.0 * stderr,
        stderr,
        tail_exponent_fit: exponent,
        growth_exponent: 0.0,
        horizon: controls.horizon,
        converged,
        replicas: controls.replicas,
        argmax: 0,
        pairs: Vec::new(),
        curve: times.into_iter().zip(sup).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criticality::{calibrate, ground_transform, SolverControls};
    use crate::model::{build_space, Boundary, DeathRates, Kernel, LatticeWindow, RateModel, SpaceSpec, Stencil};
    use crate::replicas::{replica_rng, Sequential};

    fn nn_model(d: usize) -> TransformedModel {
        let space = build_space(SpaceSpec::Lattice(LatticeWindow::new(d, 1, Boundary::Unbounded))).unwrap();
        let model = RateModel::new(Kernel::Stencil(Stencil::nearest_neighbor(d)), DeathRates::Constant(1.0));
        let (model, gs) = calibrate(&model, &space, &SolverControls::default()).unwrap();
        ground_transform(&model, &space, &gs).unwrap()
    }

    #[test]
    fn grid_has_exact_decades() {
        let g = checkpoint_grid(1000.0, 8, 4);
        assert_eq!(g.len(), 33);
        assert_eq!(g[32], 1000.0);
        assert!((g[24] - 100.0).abs() < 1e-9);
        assert!((g[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn tail_factor_for_three_dimensions() {
        let k = tail_factor(1000.0, 1.5);
        assert!((k - 1.0 / (Float::sqrt(10.0) - 1.0)).abs() < 1e-12);
        assert_eq!(tail_factor(1000.0, 0.5), 0.0);
    }

    #[test]
    fn running_integral_matches_first_interval() {
        // Before the first jump the integrand is b(z0).
        let tm = nn_model(3);
        let law = LatticeSampler::new(&tm).unwrap();
        let start = PairStart {
            displacement: vec![1, 0, 0],
            mark_x: 0,
            mark_y: 0,
        };
        let mut rng = replica_rng(1, 2, 3);
        let cps = [1e-9, 1e-8];
        let mut out = [0.0; 2];
        pair_running_integrals(&law, &start, &cps, PairFunctional::Forward, &mut rng, &mut out);
        assert!((out[0] - 1e-9 / 6.0).abs() < 1e-20);
        assert!((out[1] - 1e-8 / 6.0).abs() < 1e-19);
    }

    #[test]
    fn small_time_integral_is_linear() {
        let tm = nn_model(3);
        let c = TransienceControls {
            horizon: 0.01,
            replicas: 2000,
            ..Default::default()
        };
        let starts = [PairStart {
            displacement: vec![0, 1, 0],
            mark_x: 0,
            mark_y: 0,
        }];
        let r = estimate_pairs(&tm, &starts, &c, &Sequential, 5).unwrap();
        // E ∫₀^T b ≈ T b(z0) (1 − T) for small T.
        let want = 0.01 / 6.0 * (1.0 - 0.01);
        assert!((r[0].mean[32] - want).abs() < 3.0 * r[0].stderr[32] + 1e-6);
    }

    #[test]
    fn dense_recurrent_model_does_not_converge() {
        let space = build_space(SpaceSpec::finite(vec![1.0; 4])).unwrap();
        let tm = TransformedModel::from_dense(space, nalgebra::DMatrix::from_element(4, 4, 0.25), vec![1.0; 4], None);
        let r = estimate_h_dense(&tm, &StationaryControls::default()).unwrap();
        assert!(!r.converged);
        assert!(r.h_hat.is_infinite());
    }

    #[test]
    fn zero_kernel_gives_zero_h() {
        let space = build_space(SpaceSpec::finite(vec![1.0; 3])).unwrap();
        let tm = TransformedModel::from_dense(space, nalgebra::DMatrix::zeros(3, 3), vec![1.0; 3], None);
        let r = estimate_h(&tm, None, &TransienceControls::default(), &Sequential, 0).unwrap();
        assert_eq!(r.h_hat, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn default_grid_covers_support_and_marks() {
        let tm = nn_model(2);
        assert_eq!(default_grid(&tm).unwrap().len(), 4);
    }
}
