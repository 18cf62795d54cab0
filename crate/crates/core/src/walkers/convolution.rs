use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::WalkerError;
use crate::model::Stencil;

const MASS_TOL: f64 = 1e-9;

/// Function on the box `[-radius, radius]^dim`, zero outside, stored
/// row-major with the first coordinate outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDensity {
    pub dim: usize,
    pub radius: i64,
    pub values: Vec<f64>,
}

impl LatticeDensity {
    pub fn zeros(dim: usize, radius: i64) -> Self {
        let side = (2 * radius + 1) as usize;
        Self {
            dim,
            radius,
            values: vec![0.0; side.pow(dim as u32)],
        }
    }

    pub fn delta(dim: usize) -> Self {
        Self {
            dim,
            radius: 0,
            values: vec![1.0],
        }
    }

    pub fn from_stencil(alpha: &Stencil) -> Self {
        let mut out = Self::zeros(alpha.dim(), alpha.radius());
        for (u, &v) in alpha.offsets().iter().zip(alpha.values()) {
            let i = out.index(u).expect("inside radius");
            out.values[i] += v;
        }
        out
    }

    pub fn side(&self) -> i64 {
        2 * self.radius + 1
    }

    pub fn index(&self, z: &[i64]) -> Option<usize> {
        let side = self.side();
        let mut idx = 0i64;
        for &c in z {
            if c < -self.radius || c > self.radius {
                return None;
            }
            idx = idx * side + c + self.radius;
        }
        Some(idx as usize)
    }

    pub fn coords(&self, mut idx: usize, out: &mut [i64]) {
        let side = self.side() as usize;
        for c in out.iter_mut().rev() {
            *c = (idx % side) as i64 - self.radius;
            idx /= side;
        }
    }

    pub fn get(&self, z: &[i64]) -> f64 {
        self.index(z).map_or(0.0, |i| self.values[i])
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn mass(&self) -> f64 {
        crate::linalg::pairwise_sum(&self.values)
    }

    /// `(self * other)(z) = Σ_w self(w) other(z − w)` on the enlarged box.
    pub fn convolve(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = Self::zeros(self.dim, self.radius + other.radius);
        let mut a = vec![0i64; self.dim];
        let mut b = vec![0i64; self.dim];
        let mut z = vec![0i64; self.dim];
        let nonzero: Vec<(usize, f64)> = other
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect();
        for (i, &va) in self.values.iter().enumerate() {
            if va == 0.0 {
                continue;
            }
            self.coords(i, &mut a);
            for &(j, vb) in &nonzero {
                other.coords(j, &mut b);
                for k in 0..self.dim {
                    z[k] = a[k] + b[k];
                }
                let o = out.index(&z).expect("enlarged box");
                out.values[o] += va * vb;
            }
        }
        out
    }
}

/// Computes the convolution powers `p^{*n}`, `n = 1..=n_max`, of a
/// probability density, handing each to `visit` in order.
pub trait ConvolutionEngine {
    fn powers(
        &self,
        p: &LatticeDensity,
        n_max: usize,
        visit: &mut dyn FnMut(usize, &LatticeDensity),
    ) -> Result<(), WalkerError>;
}

/// Repeated direct convolution on an exactly growing box. No mass is lost.
#[derive(Debug, Clone, Copy, Default)]
pub struct DirectConvolution;

impl ConvolutionEngine for DirectConvolution {
    fn powers(
        &self,
        p: &LatticeDensity,
        n_max: usize,
        visit: &mut dyn FnMut(usize, &LatticeDensity),
    ) -> Result<(), WalkerError> {
        let mut cur = p.clone();
        for n in 1..=n_max {
            if n > 1 {
                cur = cur.convolve(p);
            }
            check_mass(n, &cur)?;
            visit(n, &cur);
        }
        Ok(())
    }
}

fn check_mass(n: usize, d: &LatticeDensity) -> Result<(), WalkerError> {
    let deficit = (1.0 - d.mass()).abs();
    if deficit > MASS_TOL {
        return Err(WalkerError::MassLeakage { n, deficit });
    }
    Ok(())
}

fn normalized(alpha: &Stencil) -> Result<LatticeDensity, WalkerError> {
    let mass = alpha.mass();
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(WalkerError::NotNormalized { state: 0, mass });
    }
    Ok(LatticeDensity::from_stencil(alpha))
}

/// `p^{*j}` for `j = 0..=n_max` with `p = α / Σα`; entry 0 is the point mass.
pub fn power_tables(alpha: &Stencil, n_max: usize) -> Vec<LatticeDensity> {
    let mut p = LatticeDensity::from_stencil(alpha);
    let mass = alpha.mass();
    p.values.iter_mut().for_each(|v| *v /= mass);
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(LatticeDensity::delta(alpha.dim()));
    DirectConvolution
        .powers(&p, n_max, &mut |_, d| out.push(d.clone()))
        .expect("direct convolution keeps mass");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionReport {
    pub n: Vec<usize>,
    /// `sup_ξ α^{*n}(ξ)`.
    pub sup: Vec<f64>,
    /// `sup_ξ α^{*n}(ξ) · n^{d/2}`.
    pub scaled: Vec<f64>,
    pub median: f64,
    /// `max(scaled) / median(scaled)`.
    pub max_over_median: f64,
    /// `α^{*2}(0)`.
    pub second_at_origin: f64,
    pub pass: bool,
}

/// Convolution powers of a normalized stencil and the scaled sequence
/// `sup α^{*n} · n^{d/2}`. Passes when the sequence stays within twice its
/// median.
pub fn convolution_bound_check<E: ConvolutionEngine + ?Sized>(
    alpha: &Stencil,
    n_max: usize,
    engine: &E,
) -> Result<ConvolutionReport, WalkerError> {
    if n_max == 0 {
        return Err(WalkerError::InvalidGrid("n_max must be positive"));
    }
    let p = normalized(alpha)?;
    let half = alpha.dim() as f64 / 2.0;
    let origin = vec![0i64; alpha.dim()];
    let mut n = Vec::with_capacity(n_max);
    let mut sup = Vec::with_capacity(n_max);
    let mut second_at_origin = if n_max < 2 { p.convolve(&p).get(&origin) } else { 0.0 };
    engine.powers(&p, n_max, &mut |k, d| {
        n.push(k);
        sup.push(d.sup());
        if k == 2 {
            second_at_origin = d.get(&origin);
        }
    })?;
    let scaled: Vec<f64> = n.iter().zip(&sup).map(|(&k, &s)| s * Float::powf(k as f64, half)).collect();
    let mut sorted = scaled.clone();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    let max = sorted[m - 1];
    let max_over_median = max / median;
    Ok(ConvolutionReport {
        n,
        sup,
        scaled,
        median,
        max_over_median,
        second_at_origin,
        pass: max_over_median <= 2.0,
    })
}
