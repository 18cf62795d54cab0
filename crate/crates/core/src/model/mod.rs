//! State spaces, rate models and particle configurations.

mod kernel;
mod space;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use kernel::{Kernel, Stencil};
pub use space::{build_space, Boundary, LatticeWindow, MarkSet, Point, Shape, SpaceSpec, StateSpace};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("state space is empty")]
    EmptySpace,
    #[error("weight {value} at index {index} is not strictly positive and finite")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("duplicate point id {0:?}")]
    DuplicatePoint(String),
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid death rates: {0}")]
    InvalidDeath(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unknown point {0:?}")]
    UnknownPoint(Point),
}

/// Death rates `V(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DeathRates {
    Constant(f64),
    PerPoint(Vec<f64>),
    /// `v(s)` on a lattice × marks product.
    PerMark(Vec<f64>),
}

impl DeathRates {
    pub fn per_point(&self, space: &StateSpace) -> Vec<f64> {
        match self {
            DeathRates::Constant(v) => vec![*v; space.len()],
            DeathRates::PerPoint(v) => v.clone(),
            DeathRates::PerMark(v) => (0..space.len()).map(|i| v[space.mark_of(i)]).collect(),
        }
    }

    /// Rates per mark when they do not depend on the lattice coordinate.
    pub fn per_mark(&self, n_marks: usize) -> Option<Vec<f64>> {
        match self {
            DeathRates::Constant(v) => Some(vec![*v; n_marks]),
            DeathRates::PerMark(v) => Some(v.clone()),
            DeathRates::PerPoint(_) => None,
        }
    }

    fn check(&self, space: &StateSpace) -> Result<(), ModelError> {
        match self {
            DeathRates::Constant(_) => Ok(()),
            DeathRates::PerPoint(v) if v.len() == space.len() => Ok(()),
            DeathRates::PerPoint(v) => Err(ModelError::ShapeMismatch(format!(
                "{} death rates for {} points",
                v.len(),
                space.len()
            ))),
            DeathRates::PerMark(v) => match space.marks() {
                Some(m) if m.len() == v.len() => Ok(()),
                Some(m) => Err(ModelError::ShapeMismatch(format!(
                    "{} death rates for {} marks",
                    v.len(),
                    m.len()
                ))),
                None => Err(ModelError::ShapeMismatch(
                    "per-mark death rates need a marked space".into(),
                )),
            },
        }
    }
}

/// Birth kernel, death rates and optional jump kernel `J(y, x)`: a particle
/// at `x` jumps to `y` at rate `J(y, x) m(dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateModel {
    pub birth: Kernel,
    pub death: DeathRates,
    pub jump: Option<Kernel>,
}

impl RateModel {
    pub fn new(birth: Kernel, death: DeathRates) -> Self {
        Self {
            birth,
            death,
            jump: None,
        }
    }

    pub fn with_jump(mut self, jump: Kernel) -> Self {
        self.jump = Some(jump);
        self
    }

    /// Shape consistency with `space`. Numerical bounds are left to
    /// [`validate_model`].
    pub fn check(&self, space: &StateSpace) -> Result<(), ModelError> {
        self.birth.check(space)?;
        self.death.check(space)?;
        if let Some(j) = &self.jump {
            j.check(space)?;
        }
        Ok(())
    }

    /// Translation-invariant kernel, coordinate-free death rates and no jumps:
    /// the model lives on the whole lattice rather than on its window.
    pub fn is_homogeneous(&self, space: &StateSpace) -> bool {
        self.birth.is_translation_invariant()
            && self.jump.is_none()
            && space.window().is_some()
            && self.death.per_mark(space.n_marks()).is_some()
    }
}

/// `a(x, y)` for two points of `space`.
pub fn kernel_eval(model: &RateModel, space: &StateSpace, x: &Point, y: &Point) -> Result<f64, ModelError> {
    let i = space.index_of(x).ok_or_else(|| ModelError::UnknownPoint(x.clone()))?;
    let j = space.index_of(y).ok_or_else(|| ModelError::UnknownPoint(y.clone()))?;
    model.check(space)?;
    Ok(model.birth.entry(space, i, j))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDiagnostics {
    pub v_min: f64,
    pub v_max: f64,
    /// `sup_x Σ_y a(x, y) m(y)`.
    pub birth_row_mass: f64,
    /// `sup_x Σ_y a(y, x) m(y)`.
    pub birth_column_mass: f64,
    pub jump_column_mass: Option<f64>,
    pub death_positive: bool,
    pub death_bounded: bool,
    pub finite_mass: bool,
    pub shape_error: Option<ModelError>,
}

impl ModelDiagnostics {
    pub fn pass(&self) -> bool {
        self.shape_error.is_none() && self.death_positive && self.death_bounded && self.finite_mass
    }
}

/// Check positivity and boundedness of `V` and finiteness of kernel masses.
///
/// Homogeneous lattice models report masses over the whole lattice, not the
/// window.
pub fn validate_model(model: &RateModel, space: &StateSpace) -> ModelDiagnostics {
    let shape_error = model.check(space).err();
    let v = if shape_error.is_some() && !matches!(shape_error, Some(ModelError::InvalidKernel(_))) {
        match &model.death {
            DeathRates::Constant(c) => vec![*c],
            DeathRates::PerPoint(v) | DeathRates::PerMark(v) => v.clone(),
        }
    } else {
        model.death.per_point(space)
    };
    let v_min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let v_max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let death_positive = v.iter().all(|&x| x > 0.0);
    let death_bounded = v.iter().all(|x| x.is_finite());

    let (row, col, jump) = if shape_error.is_some() {
        (f64::NAN, f64::NAN, None)
    } else {
        let (row, col) = kernel_masses(&model.birth, space);
        let jump = model.jump.as_ref().map(|j| kernel_masses(j, space).1);
        (row, col, jump)
    };
    let finite_mass = row.is_finite() && col.is_finite() && jump.is_none_or(f64::is_finite);
    ModelDiagnostics {
        v_min,
        v_max,
        birth_row_mass: row,
        birth_column_mass: col,
        jump_column_mass: jump,
        death_positive,
        death_bounded,
        finite_mass,
        shape_error,
    }
}

/// `(sup_x Σ_y k(x,y) m(y), sup_x Σ_y k(y,x) m(y))`.
fn kernel_masses(k: &Kernel, space: &StateSpace) -> (f64, f64) {
    match (k, space.shape()) {
        (Kernel::Stencil(s), Shape::Lattice(w)) => {
            let m = s.mass() * w.site_weight;
            (m, m)
        }
        (Kernel::Factorized { alpha, marks }, Shape::Product(w, ms)) => {
            let a = alpha.mass() * w.site_weight;
            let n = ms.len();
            let row = (0..n)
                .map(|s| (0..n).map(|t| marks[(s, t)] * ms.nu[t]).sum::<f64>())
                .fold(0.0, f64::max);
            let col = (0..n)
                .map(|t| (0..n).map(|s| marks[(s, t)] * ms.nu[s]).sum::<f64>())
                .fold(0.0, f64::max);
            (a * row, a * col)
        }
        _ => {
            let a = k.to_dense(space);
            let m = space.weights();
            let n = space.len();
            let row = (0..n)
                .map(|x| (0..n).map(|y| a[(x, y)] * m[y]).sum::<f64>())
                .fold(0.0, f64::max);
            let col = (0..n)
                .map(|x| (0..n).map(|y| a[(y, x)] * m[y]).sum::<f64>())
                .fold(0.0, f64::max);
            (row, col)
        }
    }
}

/// Finite multiset of points: particle counts by point index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Configuration {
    counts: BTreeMap<usize, u64>,
}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts(counts: &[u64]) -> Self {
        let mut c = Self::new();
        for (i, &k) in counts.iter().enumerate() {
            c.add(i, k);
        }
        c
    }

    pub fn get(&self, x: usize) -> u64 {
        self.counts.get(&x).copied().unwrap_or(0)
    }

    pub fn add(&mut self, x: usize, k: u64) {
        if k > 0 {
            *self.counts.entry(x).or_insert(0) += k;
        }
    }

    /// Remove one particle at `x`. Returns `false` if none was there.
    pub fn remove(&mut self, x: usize) -> bool {
        match self.counts.get_mut(&x) {
            Some(c) if *c > 1 => {
                *c -= 1;
                true
            }
            Some(_) => {
                self.counts.remove(&x);
                true
            }
            None => false,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Occupied points with their multiplicities, in index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&x, &c)| (x, c))
    }

    pub fn to_counts(&self, n: usize) -> Vec<u64> {
        let mut out = vec![0; n];
        for (x, c) in self.iter() {
            out[x] = c;
        }
        out
    }
}
