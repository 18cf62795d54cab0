use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

/// Order-`n` array over the points of a finite space, stored row-major
/// (last index fastest). Order 0 holds the single value `k⁽⁰⁾`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTensor {
    order: usize,
    points: usize,
    values: Vec<f64>,
}

impl CorrelationTensor {
    pub fn new(order: usize, points: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), points.pow(order as u32), "tensor size mismatch");
        Self { order, points, values }
    }

    pub fn constant(order: usize, points: usize, c: f64) -> Self {
        Self::new(order, points, vec![c; points.pow(order as u32)])
    }

    pub fn zeros(order: usize, points: usize) -> Self {
        Self::constant(order, points, 0.0)
    }

    pub fn from_fn(order: usize, points: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let len = points.pow(order as u32);
        let mut idx = vec![0usize; order];
        let mut values = Vec::with_capacity(len);
        for flat in 0..len {
            unravel(flat, points, &mut idx);
            values.push(f(&idx));
        }
        Self { order, points, values }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let i = self.flat_index(idx);
        self.values[i] = v;
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: f64, other: &Self) {
        assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `sup |self − other|`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }

    /// `out(i_0..i_{n-1}) = self(i_{p(0)}..i_{p(n-1)})`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.order);
        let mut src = vec![0usize; self.order];
        Self::from_fn(self.order, self.points, |idx| {
            for (k, &p) in perm.iter().enumerate() {
                src[k] = idx[p];
            }
            self.get(&src)
        })
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.order.saturating_sub(1)).all(|a| {
            let mut perm: Vec<usize> = (0..self.order).collect();
            perm.swap(a, a + 1);
            self.distance(&self.permuted(&perm)) <= tol
        })
    }

    /// Apply `m` along one axis:
    /// `out(.., x, ..) = Σ_y m(x, y) self(.., y, ..)`.
    pub fn mode_apply(&self, axis: usize, m: &DMatrix<f64>) -> Self {
        assert!(axis < self.order);
        let n = self.points;
        let stride = n.pow((self.order - 1 - axis) as u32);
        let block = stride * n;
        let mut out = vec![0.0; self.values.len()];
        let mut column = vec![0.0; n];
        for base in (0..self.values.len()).step_by(block) {
            for inner in 0..stride {
                for (y, c) in column.iter_mut().enumerate() {
                    *c = self.values[base + y * stride + inner];
                }
                for x in 0..n {
                    let mut s = 0.0;
                    for (y, c) in column.iter().enumerate() {
                        s += m[(x, y)] * c;
                    }
                    out[base + x * stride + inner] = s;
                }
            }
        }
        Self {
            order: self.order,
            points: n,
            values: out,
        }
    }

    /// Apply `m` along every axis.
    pub fn apply_all(&self, m: &DMatrix<f64>) -> Self {
        (0..self.order).fold(self.clone(), |t, axis| t.mode_apply(axis, m))
    }
}

pub(crate) fn unravel(mut flat: usize, points: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = flat % points;
        flat /= points;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_zero_is_scalar() {
        let t = CorrelationTensor::constant(0, 5, 1.0);
        assert_eq!(t.values(), &[1.0]);
        assert_eq!(t.get(&[]), 1.0);
    }

    #[test]
    fn mode_apply_matches_explicit_loop() {
        let t = CorrelationTensor::from_fn(3, 3, |i| (i[0] * 9 + i[1] * 3 + i[2]) as f64 + 0.5);
        let m = DMatrix::from_fn(3, 3, |a, b| (a as f64 + 1.0) * 0.3 - b as f64 * 0.1);
        let out = t.mode_apply(1, &m);
        for a in 0..3 {
            for x in 0..3 {
                for c in 0..3 {
                    let want: f64 = (0..3).map(|y| m[(x, y)] * t.get(&[a, y, c])).sum();
                    assert!((out.get(&[a, x, c]) - want).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn permutation_roundtrip() {
        let t = CorrelationTensor::from_fn(3, 2, |i| (i[0] + 2 * i[1] + 4 * i[2]) as f64);
        let p = t.permuted(&[2, 0, 1]);
        assert_eq!(p.get(&[1, 0, 0]), t.get(&[0, 1, 0]));
        assert!(!t.is_symmetric(0.0));
        assert!(CorrelationTensor::constant(3, 2, 1.0).is_symmetric(0.0));
    }
}
