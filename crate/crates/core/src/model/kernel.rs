use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::space::{Boundary, Shape, StateSpace};
use super::ModelError;

/// Translation-invariant kernel `α(u)` given on a finite set of lattice
/// displacements. Displacements not listed have value zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    dim: usize,
    offsets: Vec<Vec<i64>>,
    values: Vec<f64>,
    lookup: BTreeMap<Vec<i64>, usize>,
}

impl Stencil {
    pub fn new(dim: usize, offsets: Vec<Vec<i64>>, values: Vec<f64>) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::InvalidKernel("stencil dimension must be >= 1".into()));
        }
        if offsets.len() != values.len() {
            return Err(ModelError::InvalidKernel(format!(
                "{} stencil offsets for {} values",
                offsets.len(),
                values.len()
            )));
        }
        let mut lookup = BTreeMap::new();
        for (i, (u, &v)) in offsets.iter().zip(&values).enumerate() {
            if u.len() != dim {
                return Err(ModelError::InvalidKernel(format!(
                    "stencil offset {i} has {} coordinates, expected {dim}",
                    u.len()
                )));
            }
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ModelError::InvalidKernel(format!(
                    "stencil value {v} at offset {i} is not a finite non-negative number"
                )));
            }
            if lookup.insert(u.clone(), i).is_some() {
                return Err(ModelError::InvalidKernel(format!("duplicate stencil offset {u:?}")));
            }
        }
        Ok(Self {
            dim,
            offsets,
            values,
            lookup,
        })
    }

    /// `1/(2d)` on each of the `2d` unit displacements.
    pub fn nearest_neighbor(dim: usize) -> Self {
        let mut offsets = Vec::with_capacity(2 * dim);
        for axis in 0..dim {
            for sign in [1, -1] {
                let mut u = vec![0i64; dim];
                u[axis] = sign;
                offsets.push(u);
            }
        }
        let values = vec![1.0 / (2 * dim) as f64; 2 * dim];
        Self::new(dim, offsets, values).expect("nearest-neighbour stencil is well formed")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, u: &[i64]) -> f64 {
        self.lookup.get(u).map_or(0.0, |&i| self.values[i])
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |a, &b| a.max(b))
    }

    /// Largest absolute coordinate among offsets carrying positive weight.
    pub fn radius(&self) -> i64 {
        self.offsets
            .iter()
            .zip(&self.values)
            .filter(|(_, &v)| v > 0.0)
            .flat_map(|(u, _)| u.iter().map(|c| c.abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn is_even(&self) -> bool {
        self.offsets.iter().zip(&self.values).all(|(u, &v)| {
            let neg: Vec<i64> = u.iter().map(|c| -c).collect();
            self.value(&neg) == v
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= c;
        }
        out
    }
}

/// Birth or jump kernel `a(x, y)`: rate per unit measure of a new particle at
/// `x` from a parent at `y`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// Matrix indexed by point indices, `a[(x, y)]`.
    Dense(DMatrix<f64>),
    Stencil(Stencil),
    /// `α(ξ - ξ') Q(s, s')` on a lattice × marks product.
    Factorized { alpha: Stencil, marks: DMatrix<f64> },
}

impl Kernel {
    /// Kernel divided by `r`. For factorized kernels only `Q` is touched.
    /// Division by exactly 1 leaves every entry bitwise unchanged.
    pub fn divided_by(&self, r: f64) -> Self {
        match self {
            Kernel::Dense(a) => Kernel::Dense(a.map(|v| v / r)),
            Kernel::Stencil(s) => {
                let mut out = s.clone();
                for v in &mut out.values {
                    *v /= r;
                }
                Kernel::Stencil(out)
            }
            Kernel::Factorized { alpha, marks } => Kernel::Factorized {
                alpha: alpha.clone(),
                marks: marks.map(|v| v / r),
            },
        }
    }

    pub fn is_translation_invariant(&self) -> bool {
        !matches!(self, Kernel::Dense(_))
    }

    /// Check that the kernel form fits the space shape.
    pub fn check(&self, space: &StateSpace) -> Result<(), ModelError> {
        match self {
            Kernel::Dense(a) => {
                let n = space.len();
                if a.nrows() != n || a.ncols() != n {
                    return Err(ModelError::ShapeMismatch(format!(
                        "dense kernel is {}x{}, space has {n} points",
                        a.nrows(),
                        a.ncols()
                    )));
                }
                if let Some(v) = a.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                    return Err(ModelError::InvalidKernel(format!(
                        "dense kernel entry {v} is not a finite non-negative number"
                    )));
                }
                Ok(())
            }
            Kernel::Stencil(s) => match space.shape() {
                Shape::Lattice(w) => check_stencil_fits(s, w.dim, w.radius, w.boundary),
                _ => Err(ModelError::ShapeMismatch(
                    "stencil kernels need a lattice space without marks".into(),
                )),
            },
            Kernel::Factorized { alpha, marks } => match space.shape() {
                Shape::Product(w, m) => {
                    check_stencil_fits(alpha, w.dim, w.radius, w.boundary)?;
                    if marks.nrows() != m.len() || marks.ncols() != m.len() {
                        return Err(ModelError::ShapeMismatch(format!(
                            "mark kernel is {}x{}, space has {} marks",
                            marks.nrows(),
                            marks.ncols(),
                            m.len()
                        )));
                    }
                    if let Some(v) = marks.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                        return Err(ModelError::InvalidKernel(format!(
                            "mark kernel entry {v} is not strictly positive and finite"
                        )));
                    }
                    Ok(())
                }
                _ => Err(ModelError::ShapeMismatch(
                    "factorized kernels need a lattice x marks product space".into(),
                )),
            },
        }
    }

    /// `a(x, y)` by point index. Assumes [`Kernel::check`] passed.
    pub fn entry(&self, space: &StateSpace, x: usize, y: usize) -> f64 {
        match self {
            Kernel::Dense(a) => a[(x, y)],
            Kernel::Stencil(s) => {
                let w = space.window().expect("lattice space");
                let u = w.displacement(space.coords(x).unwrap(), space.coords(y).unwrap());
                s.value(&u)
            }
            Kernel::Factorized { alpha, marks } => {
                let w = space.window().expect("lattice space");
                let u = w.displacement(space.coords(x).unwrap(), space.coords(y).unwrap());
                let a = alpha.value(&u);
                if a == 0.0 {
                    0.0
                } else {
                    a * marks[(space.mark_of(x), space.mark_of(y))]
                }
            }
        }
    }

    /// Materialize over the enumerated points of `space`.
    pub fn to_dense(&self, space: &StateSpace) -> DMatrix<f64> {
        if let Kernel::Dense(a) = self {
            return a.clone();
        }
        let n = space.len();
        DMatrix::from_fn(n, n, |x, y| self.entry(space, x, y))
    }
}

fn check_stencil_fits(s: &Stencil, dim: usize, radius: i64, boundary: Boundary) -> Result<(), ModelError> {
    if s.dim() != dim {
        return Err(ModelError::ShapeMismatch(format!(
            "stencil has dimension {}, lattice has {dim}",
            s.dim()
        )));
    }
    if boundary == Boundary::Periodic && s.radius() > radius {
        return Err(ModelError::ShapeMismatch(format!(
            "stencil radius {} exceeds periodic window radius {radius}",
            s.radius()
        )));
    }
    Ok(())
}
