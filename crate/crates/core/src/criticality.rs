//! Ground state, calibration to criticality and the ground-state transform.
//!
//! Criticality means `Σ_y a(x,y) Ψ(y) m(y) = V(x) Ψ(x)`. With a jump kernel
//! the balance becomes
//! `Σ_y (a + J)(x,y) Ψ(y) m(y) = (V(x) + Σ_y J(y,x) m(y)) Ψ(x)`.
//! After the transform `b = a/Ψ`, `m̄ = Ψ m` constants are conserved.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::model::{validate_model, Kernel, ModelError, RateModel, Shape, StateSpace, Stencil};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CriticalityError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("model fails validation: {0}")]
    Invalid(String),
    #[error("power iteration did not converge in {iterations} iterations (bracket [{lo}, {hi}])")]
    NotConverged { iterations: usize, lo: f64, hi: f64 },
    #[error("reducible kernel: eigenvector entry {min} below positivity floor relative to {max}")]
    Reducible { min: f64, max: f64 },
    #[error("Perron root {0} is not a positive finite number")]
    NonPositiveEigenvalue(f64),
    #[error("model is not critical (r = {0})")]
    NotCritical(f64),
    #[error("the operation needs a factorized homogeneous model")]
    NotFactorized,
    #[error("no birth scaling makes the jump model critical: {0}")]
    NoCriticalScale(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `max Ψ = 1`.
    SupNorm,
    /// `Σ_s q(s) ν(s) = 1` on marked spaces.
    MarkMass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverControls {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverControls {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iters: 100_000,
        }
    }
}

/// Perron vector of a non-negative matrix with its Collatz–Wielandt history.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronPair {
    pub vector: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// `(min, max)` of `(Kψ)/ψ` at each iterate.
    pub history: Vec<(f64, f64)>,
    /// `‖Kψ − rψ‖∞ / ‖ψ‖∞`.
    pub residual: f64,
}

const POSITIVITY_FLOOR: f64 = 1e-12;
const CRITICAL_TOL: f64 = 1e-8;

/// Power iteration with sup-norm normalization.
///
/// Iterates with `K + σI`, `σ` half the first upper bound, so periodic
/// kernels converge too. The bracket is monotone either way.
pub fn perron(k: &DMatrix<f64>, controls: &SolverControls) -> Result<PerronPair, CriticalityError> {
    let n = k.nrows();
    let mut psi = DVector::from_element(n, 1.0);
    let mut history = Vec::new();
    let mut sigma = None;
    for it in 1..=controls.max_iters {
        let y = k * &psi;
        let (lo, hi) = collatz_wielandt(&y, &psi);
        history.push((lo, hi));
        if hi - lo <= controls.tol * hi {
            let value = 0.5 * (lo + hi);
            let max = psi.max();
            let min = psi.min();
            if min < POSITIVITY_FLOOR * max {
                return Err(CriticalityError::Reducible { min, max });
            }
            let residual = (&y - &psi * value).amax() / max;
            return Ok(PerronPair {
                vector: psi.iter().copied().collect(),
                value,
                iterations: it,
                history,
                residual,
            });
        }
        let s = *sigma.get_or_insert(0.5 * hi);
        let mut next = y + &psi * s;
        let m = next.max();
        if !(m > 0.0 && m.is_finite()) {
            return Err(CriticalityError::NonPositiveEigenvalue(m));
        }
        next /= m;
        psi = next;
    }
    let (lo, hi) = *history.last().unwrap_or(&(0.0, f64::INFINITY));
    let min = psi.min();
    let max = psi.max();
    if min < POSITIVITY_FLOOR * max {
        return Err(CriticalityError::Reducible { min, max });
    }
    Err(CriticalityError::NotConverged {
        iterations: controls.max_iters,
        lo,
        hi,
    })
}

fn collatz_wielandt(y: &DVector<f64>, psi: &DVector<f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (a, b) in y.iter().zip(psi.iter()) {
        let r = if *b > 0.0 {
            a / b
        } else if *a > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    /// `Ψ` per point of the space.
    pub psi: Vec<f64>,
    pub eigenvalue: f64,
    pub normalization: Normalization,
    /// `q(s)` for homogeneous lattice models.
    pub mark_profile: Option<Vec<f64>>,
    pub iterations: usize,
    pub bracket_history: Vec<(f64, f64)>,
    pub residual: f64,
}

/// Mark problem `K(s,s') = A Q(s,s') ν(s') / v(s)`, `A = Σ_u α(u) · site weight`.
fn mark_operator(alpha: &Stencil, q: &DMatrix<f64>, v: &[f64], nu: &[f64], site_weight: f64) -> DMatrix<f64> {
    let a = alpha.mass() * site_weight;
    let n = nu.len();
    DMatrix::from_fn(n, n, |s, t| a * q[(s, t)] * nu[t] / v[s])
}

/// Birth kernel split as `(α, Q)`; stencil kernels have a single mark.
fn homogeneous_parts(kernel: &Kernel) -> Option<(&Stencil, DMatrix<f64>)> {
    match kernel {
        Kernel::Stencil(s) => Some((s, DMatrix::from_element(1, 1, 1.0))),
        Kernel::Factorized { alpha, marks } => Some((alpha, marks.clone())),
        Kernel::Dense(_) => None,
    }
}

fn check_valid(model: &RateModel, space: &StateSpace) -> Result<(), CriticalityError> {
    model.check(space)?;
    let d = validate_model(model, space);
    if !d.pass() {
        return Err(CriticalityError::Invalid(alloc::format!(
            "V in [{}, {}], birth row mass {}",
            d.v_min, d.v_max, d.birth_row_mass
        )));
    }
    Ok(())
}

/// Perron pair `(r, Ψ)` of `T = diag(1/D) (A + J) diag(m)` with
/// `D = V + Σ_y J(y,·) m(y)`.
///
/// Homogeneous lattice models are solved through their mark problem, which
/// is exact on the infinite lattice and on periodic windows alike.
pub fn solve_ground_state(
    model: &RateModel,
    space: &StateSpace,
    controls: &SolverControls,
) -> Result<GroundState, CriticalityError> {
    check_valid(model, space)?;
    if model.is_homogeneous(space) {
        let (alpha, q) = homogeneous_parts(&model.birth).expect("homogeneous");
        let nm = space.n_marks();
        let v = model.death.per_mark(nm).expect("homogeneous");
        let nu = space.marks().map_or(vec![1.0], |m| m.nu.clone());
        let w = space.window().expect("lattice").site_weight;
        let k = mark_operator(alpha, &q, &v, &nu, w);
        let pair = perron(&k, controls)?;
        let (profile, normalization) = if space.marks().is_some() {
            let mass: f64 = pair.vector.iter().zip(&nu).map(|(a, b)| a * b).sum();
            (pair.vector.iter().map(|x| x / mass).collect::<Vec<_>>(), Normalization::MarkMass)
        } else {
            (pair.vector.clone(), Normalization::SupNorm)
        };
        let psi = (0..space.len()).map(|i| profile[space.mark_of(i)]).collect();
        return Ok(GroundState {
            psi,
            eigenvalue: pair.value,
            normalization,
            mark_profile: Some(profile),
            iterations: pair.iterations,
            bracket_history: pair.history,
            residual: pair.residual,
        });
    }
    let t = dense_operator(model, space, 1.0);
    let pair = perron(&t, controls)?;
    Ok(GroundState {
        psi: pair.vector,
        eigenvalue: pair.value,
        normalization: Normalization::SupNorm,
        mark_profile: None,
        iterations: pair.iterations,
        bracket_history: pair.history,
        residual: pair.residual,
    })
}

/// `T(x,y) = (θ a(x,y) + J(x,y)) m(y) / (V(x) + Σ_z J(z,x) m(z))`.
fn dense_operator(model: &RateModel, space: &StateSpace, theta: f64) -> DMatrix<f64> {
    let n = space.len();
    let m = space.weights();
    let v = model.death.per_point(space);
    let a = model.birth.to_dense(space);
    let j = model.jump.as_ref().map(|j| j.to_dense(space));
    let out: Vec<f64> = (0..n)
        .map(|x| j.as_ref().map_or(0.0, |j| (0..n).map(|z| j[(z, x)] * m[z]).sum()))
        .collect();
    DMatrix::from_fn(n, n, |x, y| {
        let jj = j.as_ref().map_or(0.0, |j| j[(x, y)]);
        (theta * a[(x, y)] + jj) * m[y] / (v[x] + out[x])
    })
}

/// Birth kernel divided by `gs.eigenvalue`; jump kernel untouched.
pub fn rescale_to_critical(model: &RateModel, gs: &GroundState) -> Result<RateModel, CriticalityError> {
    let r = gs.eigenvalue;
    if !(r > 0.0 && r.is_finite()) {
        return Err(CriticalityError::NonPositiveEigenvalue(r));
    }
    Ok(RateModel {
        birth: model.birth.divided_by(r),
        death: model.death.clone(),
        jump: model.jump.clone(),
    })
}

/// Scale the birth kernel so the model is critical and return the scaled
/// model with its ground state.
///
/// Without jumps this is [`rescale_to_critical`]. With jumps the Perron root
/// is not linear in the birth scale, so the scale `θ` is found by bisection.
pub fn calibrate(
    model: &RateModel,
    space: &StateSpace,
    controls: &SolverControls,
) -> Result<(RateModel, GroundState), CriticalityError> {
    let gs = solve_ground_state(model, space, controls)?;
    let scaled = if model.jump.is_none() {
        rescale_to_critical(model, &gs)?
    } else {
        let theta = jump_birth_scale(model, space, controls)?;
        RateModel {
            birth: model.birth.divided_by(1.0 / theta),
            death: model.death.clone(),
            jump: model.jump.clone(),
        }
    };
    let gs = solve_ground_state(&scaled, space, controls)?;
    Ok((scaled, gs))
}

fn jump_birth_scale(model: &RateModel, space: &StateSpace, controls: &SolverControls) -> Result<f64, CriticalityError> {
    let root = |theta: f64| perron(&dense_operator(model, space, theta), controls).map(|p| p.value);
    let base = perron(&dense_operator(model, space, 0.0), controls).map(|p| p.value).unwrap_or(0.0);
    if base >= 1.0 {
        return Err(CriticalityError::NoCriticalScale(alloc::format!(
            "jumps alone have Perron root {base}"
        )));
    }
    // ρ(θ) >= θ ρ(D⁻¹AM), so θ = 1/ρ(D⁻¹AM) is an upper bracket.
    let no_jump = {
        let mut t = dense_operator(model, space, 1.0);
        let j = dense_operator(model, space, 0.0);
        t -= j;
        t
    };
    let r_birth = perron(&no_jump, controls)?.value;
    if !(r_birth > 0.0) {
        return Err(CriticalityError::NonPositiveEigenvalue(r_birth));
    }
    let mut lo = 0.0;
    let mut hi = 1.0 / r_birth;
    let mut mid = hi;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let r = root(mid)?;
        if (r - 1.0).abs() <= controls.tol {
            return Ok(mid);
        }
        if r > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(mid)
}

/// Transformed jump law of a homogeneous lattice model.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeLaw {
    pub dim: usize,
    pub site_weight: f64,
    pub alpha: Stencil,
}

/// Mark data of a homogeneous model: `ν`, calibrated `Q`, profile `q`,
/// death rates `v` and `A = Σ_u α(u) · site weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkLaw {
    pub nu: Vec<f64>,
    pub q_kernel: DMatrix<f64>,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLaw {
    /// `b(x, y)`.
    pub b: DMatrix<f64>,
    /// `J(x, y) / Ψ(x)`.
    pub jump_b: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Dense(DenseLaw),
    /// Translation-invariant model on the whole of `Z^d` (times marks).
    Lattice(LatticeLaw),
}

/// Critical model after the transform `b = a/Ψ`, `m̄ = Ψ m`.
///
/// `psi`, `mbar` and `death` are listed over the points of the space the
/// model was built on. For [`Law::Lattice`] that space is only a window of
/// the infinite lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedModel {
    pub psi: Vec<f64>,
    pub mbar: Vec<f64>,
    pub death: Vec<f64>,
    pub law: Law,
    pub marks: Option<MarkLaw>,
    pub space: StateSpace,
}

/// Apply the ground-state transform to a critical model.
pub fn ground_transform(
    model: &RateModel,
    space: &StateSpace,
    gs: &GroundState,
) -> Result<TransformedModel, CriticalityError> {
    check_valid(model, space)?;
    if (gs.eigenvalue - 1.0).abs() > CRITICAL_TOL {
        return Err(CriticalityError::NotCritical(gs.eigenvalue));
    }
    if gs.psi.len() != space.len() {
        return Err(ModelError::ShapeMismatch(alloc::format!(
            "ground state has {} entries, space has {} points",
            gs.psi.len(),
            space.len()
        ))
        .into());
    }
    let max = gs.psi.iter().copied().fold(0.0, f64::max);
    if let Some(&min) = gs.psi.iter().min_by(|a, b| a.total_cmp(b)) {
        if !(min >= POSITIVITY_FLOOR * max) || max <= 0.0 {
            return Err(CriticalityError::Reducible { min, max });
        }
    }
    let psi = gs.psi.clone();
    let mbar: Vec<f64> = psi.iter().zip(space.weights()).map(|(p, m)| p * m).collect();
    let death = model.death.per_point(space);

    let marks = if model.is_homogeneous(space) {
        let (alpha, q_kernel) = homogeneous_parts(&model.birth).expect("homogeneous");
        let nm = space.n_marks();
        let q = gs
            .mark_profile
            .clone()
            .unwrap_or_else(|| (0..nm).map(|s| psi[s]).collect());
        Some(MarkLaw {
            nu: space.marks().map_or(vec![1.0], |m| m.nu.clone()),
            q_kernel,
            q,
            v: model.death.per_mark(nm).expect("homogeneous"),
            alpha_mass: alpha.mass() * space.window().expect("lattice").site_weight,
        })
    } else {
        None
    };

    let unbounded = matches!(
        space.shape(),
        Shape::Lattice(w) | Shape::Product(w, _) if w.boundary == crate::model::Boundary::Unbounded
    );
    let law = if model.is_homogeneous(space) && unbounded {
        let (alpha, _) = homogeneous_parts(&model.birth).expect("homogeneous");
        let w = space.window().expect("lattice");
        Law::Lattice(LatticeLaw {
            dim: w.dim,
            site_weight: w.site_weight,
            alpha: alpha.clone(),
        })
    } else {
        let a = model.birth.to_dense(space);
        let b = DMatrix::from_fn(a.nrows(), a.ncols(), |x, y| a[(x, y)] / psi[x]);
        let jump_b = model.jump.as_ref().map(|j| {
            let j = j.to_dense(space);
            DMatrix::from_fn(j.nrows(), j.ncols(), |x, y| j[(x, y)] / psi[x])
        });
        Law::Dense(DenseLaw { b, jump_b })
    };
    Ok(TransformedModel {
        psi,
        mbar,
        death,
        law,
        marks,
        space: space.clone(),
    })
}

impl TransformedModel {
    /// Build directly from transformed quantities over a finite space.
    pub fn from_dense(
        space: StateSpace,
        b: DMatrix<f64>,
        death: Vec<f64>,
        jump_b: Option<DMatrix<f64>>,
    ) -> Self {
        let n = space.len();
        assert_eq!(b.nrows(), n);
        assert_eq!(death.len(), n);
        Self {
            psi: vec![1.0; n],
            mbar: space.weights().to_vec(),
            death,
            law: Law::Dense(DenseLaw { b, jump_b }),
            marks: None,
            space,
        }
    }

    pub fn len(&self) -> usize {
        self.mbar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mbar.is_empty()
    }

    pub fn dense(&self) -> Option<&DenseLaw> {
        match &self.law {
            Law::Dense(d) => Some(d),
            Law::Lattice(_) => None,
        }
    }

    pub fn lattice(&self) -> Option<&LatticeLaw> {
        match &self.law {
            Law::Lattice(l) => Some(l),
            Law::Dense(_) => None,
        }
    }

    /// Per-particle jump-out rate `Σ_y J(y,x) m(y)` at every point.
    pub fn jump_out(&self) -> Vec<f64> {
        match self.dense().and_then(|d| d.jump_b.as_ref()) {
            Some(j) => (0..self.len())
                .map(|x| (0..self.len()).map(|y| j[(y, x)] * self.mbar[y]).sum())
                .collect(),
            None => vec![0.0; self.len()],
        }
    }

    /// Level-one generator `G = (b + J/Ψ)·diag(m̄) − diag(V + jump-out)` of
    /// the first correlation function. Dense law only.
    pub fn generator(&self) -> Option<DMatrix<f64>> {
        let d = self.dense()?;
        let n = self.len();
        let out = self.jump_out();
        let mut g = DMatrix::from_fn(n, n, |x, y| {
            let j = d.jump_b.as_ref().map_or(0.0, |j| j[(x, y)]);
            (d.b[(x, y)] + j) * self.mbar[y]
        });
        for x in 0..n {
            g[(x, x)] -= self.death[x] + out[x];
        }
        Some(g)
    }

    /// Dense copy of a lattice law restricted to its window. Mass leaving
    /// the window is lost, so the copy is sub-critical near the boundary.
    pub fn dense_window(&self) -> TransformedModel {
        let (lat, ml) = match (&self.law, &self.marks) {
            (Law::Lattice(l), Some(m)) => (l, m),
            _ => return self.clone(),
        };
        let space = &self.space;
        let w = space.window().expect("lattice");
        let n = space.len();
        let b = DMatrix::from_fn(n, n, |x, y| {
            let u = w.displacement(space.coords(x).unwrap(), space.coords(y).unwrap());
            let a = lat.alpha.value(&u);
            if a == 0.0 {
                0.0
            } else {
                let (s, t) = (space.mark_of(x), space.mark_of(y));
                a * ml.q_kernel[(s, t)] / ml.q[s]
            }
        });
        TransformedModel {
            psi: self.psi.clone(),
            mbar: self.mbar.clone(),
            death: self.death.clone(),
            law: Law::Dense(DenseLaw { b, jump_b: None }),
            marks: self.marks.clone(),
            space: space.clone(),
        }
    }

    /// `sup_x |b(x,y)| over all pairs`.
    pub fn b_sup(&self) -> f64 {
        match (&self.law, &self.marks) {
            (Law::Dense(d), _) => d.b.amax(),
            (Law::Lattice(l), Some(m)) => {
                let k = m.q.len();
                let mut best = 0.0f64;
                for s in 0..k {
                    for t in 0..k {
                        best = best.max(m.q_kernel[(s, t)] / m.q[s]);
                    }
                }
                l.alpha.sup() * best
            }
            (Law::Lattice(l), None) => l.alpha.sup(),
        }
    }
}

/// `sup_x |Σ_y (b + J/Ψ)(x,y) m̄(y) − V(x) − Σ_y J(y,x) m(y)|`. Without
/// jumps this is the plain balance `Σ_y b(x,y) m̄(y) = V(x)`.
///
/// Lattice laws are summed over the whole lattice through the mark problem.
pub fn criticality_residual(tm: &TransformedModel) -> f64 {
    match (&tm.law, &tm.marks) {
        (Law::Lattice(_), Some(m)) => {
            let k = m.q.len();
            (0..k)
                .map(|s| {
                    let inflow: f64 = (0..k)
                        .map(|t| m.alpha_mass * m.q_kernel[(s, t)] * m.q[t] * m.nu[t])
                        .sum::<f64>()
                        / m.q[s];
                    (inflow - m.v[s]).abs()
                })
                .fold(0.0, f64::max)
        }
        _ => {
            let g = tm.generator().expect("dense law");
            (0..g.nrows())
                .map(|x| g.row(x).iter().sum::<f64>().abs())
                .fold(0.0, f64::max)
        }
    }
}

/// Balance of the untransformed model with jumps:
/// `sup_x |Σ_y (a+J)(x,y) Ψ(y) m(y) − (V(x) + Σ_y J(y,x) m(y)) Ψ(x)|`.
pub fn jump_criticality_residual(
    model: &RateModel,
    space: &StateSpace,
    gs: &GroundState,
) -> Result<f64, CriticalityError> {
    model.check(space)?;
    let n = space.len();
    let m = space.weights();
    let v = model.death.per_point(space);
    let a = model.birth.to_dense(space);
    let j = model
        .jump
        .as_ref()
        .map_or_else(|| DMatrix::zeros(n, n), |j| j.to_dense(space));
    let psi = &gs.psi;
    let mut worst = 0.0f64;
    for x in 0..n {
        let mut lhs = 0.0;
        let mut out = 0.0;
        for y in 0..n {
            lhs += (a[(x, y)] + j[(x, y)]) * psi[y] * m[y];
            out += j[(y, x)] * m[y];
        }
        worst = worst.max((lhs - (v[x] + out) * psi[x]).abs());
    }
    Ok(worst)
}

/// `Θ(s,s') = A Q(s,s') q(s') / (v(s) q(s))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaKernel {
    pub theta: DMatrix<f64>,
    pub nu: Vec<f64>,
}

impl ThetaKernel {
    /// `Σ_{s'} Θ(s,s') ν(s')` per row.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nu.len())
            .map(|s| (0..self.nu.len()).map(|t| self.theta[(s, t)] * self.nu[t]).sum())
            .collect()
    }
}

pub fn theta_kernel(tm: &TransformedModel) -> Result<ThetaKernel, CriticalityError> {
    let m = tm.marks.as_ref().ok_or(CriticalityError::NotFactorized)?;
    let k = m.q.len();
    let theta = DMatrix::from_fn(k, k, |s, t| m.alpha_mass * m.q_kernel[(s, t)] * m.q[t] / (m.v[s] * m.q[s]));
    Ok(ThetaKernel {
        theta,
        nu: m.nu.clone(),
    })
}
