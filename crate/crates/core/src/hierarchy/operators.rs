use alloc::collections::BTreeMap;
use alloc::rc::Rc;
use alloc::vec;
use core::cell::RefCell;

use nalgebra::DMatrix;

use super::tensor::{unravel, CorrelationTensor};
use super::HierarchyError;
use crate::criticality::TransformedModel;
use crate::linalg::expm_metzler;

fn check_order(k: &CorrelationTensor, n: usize, points: usize) -> Result<(), HierarchyError> {
    if k.order() != n || k.points() != points {
        return Err(HierarchyError::OrderMismatch {
            expected: n,
            got: k.order(),
        });
    }
    Ok(())
}

/// `(L̂ₙ k)(x₁..xₙ) = Σᵢ (G k)(..xᵢ..)` with `G` the level-one generator
/// `b(x,y) m̄(y) − V(x)δ(x,y)` (plus jump terms when present).
pub fn apply_lhat(n: usize, tm: &TransformedModel, k: &CorrelationTensor) -> Result<CorrelationTensor, HierarchyError> {
    let g = tm.generator().ok_or(HierarchyError::NotDense)?;
    check_order(k, n, tm.len())?;
    let mut out = CorrelationTensor::zeros(n, tm.len());
    for axis in 0..n {
        out.axpy(1.0, &k.mode_apply(axis, &g));
    }
    Ok(out)
}

/// `f(x₁..xₙ) = Σᵢ k_prev(x₁..x̌ᵢ..xₙ) Σ_{j≠i} b(xᵢ, xⱼ)`; zero for `n = 1`.
pub fn source_f(n: usize, tm: &TransformedModel, k_prev: &CorrelationTensor) -> Result<CorrelationTensor, HierarchyError> {
    let d = tm.dense().ok_or(HierarchyError::NotDense)?;
    let p = tm.len();
    if n == 0 {
        return Err(HierarchyError::OrderMismatch { expected: 1, got: 0 });
    }
    check_order(k_prev, n - 1, p)?;
    if n == 1 {
        return Ok(CorrelationTensor::zeros(1, p));
    }
    let b = &d.b;
    let mut rest = vec![0usize; n - 1];
    let mut idx = vec![0usize; n];
    let mut out = CorrelationTensor::zeros(n, p);
    for flat in 0..out.len() {
        unravel(flat, p, &mut idx);
        let mut total = 0.0;
        for i in 0..n {
            let mut rate = 0.0;
            for j in 0..n {
                if j != i {
                    rate += b[(idx[i], idx[j])];
                }
            }
            if rate == 0.0 {
                continue;
            }
            let mut r = 0;
            for (j, &x) in idx.iter().enumerate() {
                if j != i {
                    rest[r] = x;
                    r += 1;
                }
            }
            total += k_prev.get(&rest) * rate;
        }
        out.values_mut()[flat] = total;
    }
    Ok(out)
}

/// `exp(t G)` of the level-one generator, cached by time.
#[derive(Debug)]
pub struct Semigroup {
    generator: DMatrix<f64>,
    cache: RefCell<BTreeMap<u64, Rc<DMatrix<f64>>>>,
}

impl Semigroup {
    pub fn new(tm: &TransformedModel) -> Result<Self, HierarchyError> {
        Ok(Self::from_generator(tm.generator().ok_or(HierarchyError::NotDense)?))
    }

    pub fn from_generator(generator: DMatrix<f64>) -> Self {
        Self {
            generator,
            cache: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn matrix(&self, t: f64) -> Rc<DMatrix<f64>> {
        let key = t.to_bits();
        if let Some(m) = self.cache.borrow().get(&key) {
            return m.clone();
        }
        let m = Rc::new(expm_metzler(&self.generator, t));
        let mut cache = self.cache.borrow_mut();
        if cache.len() > 4096 {
            cache.clear();
        }
        cache.insert(key, m.clone());
        m
    }

    /// `exp(t L̂ₙ) k`, applying `exp(tG)` along every axis.
    pub fn apply(&self, t: f64, k: &CorrelationTensor) -> CorrelationTensor {
        if t == 0.0 {
            return k.clone();
        }
        k.apply_all(&self.matrix(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_space, SpaceSpec};

    fn uniform(n: usize) -> TransformedModel {
        let space = build_space(SpaceSpec::finite(vec![1.0; n])).unwrap();
        TransformedModel::from_dense(space, DMatrix::from_element(n, n, 1.0 / n as f64), vec![1.0; n], None)
    }

    #[test]
    fn constants_are_killed() {
        let tm = uniform(3);
        for n in 1..=3 {
            let k = CorrelationTensor::constant(n, 3, 0.7);
            assert!(apply_lhat(n, &tm, &k).unwrap().sup_norm() < 1e-15);
        }
    }

    #[test]
    fn source_two_points_constant_density() {
        let space = build_space(SpaceSpec::finite(vec![1.0; 2])).unwrap();
        let b = DMatrix::from_row_slice(2, 2, &[0.3, 0.7, 0.2, 0.8]);
        let tm = TransformedModel::from_dense(space, b.clone(), vec![1.0, 1.0], None);
        let rho = 0.4;
        let f = source_f(2, &tm, &CorrelationTensor::constant(1, 2, rho)).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                let want = rho * (b[(x, y)] + b[(y, x)]);
                assert!((f.get(&[x, y]) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn order_one_source_is_zero_and_mismatch_rejected() {
        let tm = uniform(2);
        let k0 = CorrelationTensor::constant(0, 2, 1.0);
        assert_eq!(source_f(1, &tm, &k0).unwrap().sup_norm(), 0.0);
        assert!(source_f(3, &tm, &k0).is_err());
        assert!(apply_lhat(2, &tm, &CorrelationTensor::zeros(1, 2)).is_err());
    }

    #[test]
    fn semigroup_fixes_ones() {
        let tm = uniform(4);
        let s = Semigroup::new(&tm).unwrap();
        let ones = CorrelationTensor::constant(2, 4, 1.0);
        for t in [0.1, 1.0, 10.0] {
            assert!(s.apply(t, &ones).distance(&ones) < 1e-12);
        }
    }
}
