use alloc::vec::Vec;

use num_traits::Float;

use super::operators::{apply_lhat, source_f, Semigroup};
use super::tensor::CorrelationTensor;
use super::{DivergenceDiagnostics, HierarchyError};
use crate::criticality::TransformedModel;
use crate::linalg::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveControls {
    /// Largest time step between semigroup applications.
    pub max_step: f64,
    /// Gauss–Legendre nodes per step for the source integral.
    pub nodes: usize,
    /// Tolerance on the step-doubling error estimate, relative to `max(1, ‖k‖)`.
    pub tol: f64,
}

impl Default for EvolveControls {
    fn default() -> Self {
        Self {
            max_step: 0.25,
            nodes: 8,
            tol: 1e-9,
        }
    }
}

/// Levels `1..=n` of the correlation functions at each requested time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `states[i][l - 1]` is `k⁽ˡ⁾` at `times[i]`.
    pub states: Vec<Vec<CorrelationTensor>>,
    pub error_estimate: f64,
}

struct Stepper<'a> {
    tm: &'a TransformedModel,
    sg: Semigroup,
    unit_nodes: Vec<f64>,
    unit_weights: Vec<f64>,
}

impl Stepper<'_> {
    /// Exact semigroup on each level plus Gauss–Legendre quadrature of the
    /// source. Lower levels at the nodes are obtained recursively.
    fn advance(&self, state: &[CorrelationTensor], h: f64) -> Result<Vec<CorrelationTensor>, HierarchyError> {
        let mut out = Vec::with_capacity(state.len());
        for l in 1..=state.len() {
            let mut next = self.sg.apply(h, &state[l - 1]);
            if l >= 2 && h > 0.0 {
                for (x, w) in self.unit_nodes.iter().zip(&self.unit_weights) {
                    let u = x * h;
                    let lower = self.advance(&state[..l - 1], u)?;
                    let f = source_f(l, self.tm, &lower[l - 2])?;
                    next.axpy(w * h, &self.sg.apply(h - u, &f));
                }
            }
            out.push(next);
        }
        Ok(out)
    }
}

fn max_distance(a: &[CorrelationTensor], b: &[CorrelationTensor]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.distance(y)).fold(0.0, f64::max)
}

fn max_sup(a: &[CorrelationTensor]) -> f64 {
    a.iter().map(CorrelationTensor::sup_norm).fold(0.0, f64::max)
}

/// Solve `∂k⁽ˡ⁾/∂t = L̂ₗ k⁽ˡ⁾ + f⁽ˡ⁾[k⁽ˡ⁻¹⁾]` for `l = 1..=n` jointly.
///
/// `initial` holds levels `1..=n` at time 0; `times` must be non-decreasing
/// and non-negative.
pub fn evolve(
    n: usize,
    tm: &TransformedModel,
    initial: &[CorrelationTensor],
    times: &[f64],
    controls: &EvolveControls,
) -> Result<Trajectory, HierarchyError> {
    let sg = Semigroup::new(tm)?;
    if initial.len() != n {
        return Err(HierarchyError::OrderMismatch {
            expected: n,
            got: initial.len(),
        });
    }
    for (l, k) in initial.iter().enumerate() {
        if k.order() != l + 1 || k.points() != tm.len() {
            return Err(HierarchyError::OrderMismatch {
                expected: l + 1,
                got: k.order(),
            });
        }
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(HierarchyError::InvalidTimes);
    }
    let (unit_nodes, unit_weights) = gauss_legendre(controls.nodes, 0.0, 1.0);
    let stepper = Stepper {
        tm,
        sg,
        unit_nodes,
        unit_weights,
    };

    let mut state = initial.to_vec();
    let mut now = 0.0;
    let mut error_estimate = 0.0f64;
    let mut checked = false;
    let mut states = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - now;
        if span > 0.0 {
            let steps = Float::ceil(span / controls.max_step).max(1.0) as usize;
            let h = span / steps as f64;
            for s in 0..steps {
                let next = stepper.advance(&state, h)?;
                if !checked && n >= 2 {
                    let half = stepper.advance(&state, 0.5 * h)?;
                    let two = stepper.advance(&half, 0.5 * h)?;
                    let err = max_distance(&next, &two);
                    error_estimate = error_estimate.max(err);
                    checked = true;
                    if err > controls.tol * max_sup(&next).max(1.0) {
                        return Err(HierarchyError::Accuracy {
                            estimate: err,
                            step: h,
                        });
                    }
                }
                state = next;
                now = if s + 1 == steps { target } else { now + h };
            }
        }
        states.push(state.clone());
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        error_estimate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryControls {
    /// First panel end of the geometric time grid.
    pub t0: f64,
    /// Ratio between consecutive panel ends.
    pub growth: f64,
    /// Gauss–Legendre nodes per panel.
    pub nodes: usize,
    /// Stop once the estimated tail is below `tol` times the integral.
    pub tol: f64,
    /// Give up (as divergent) past this time.
    pub t_max: f64,
}

impl Default for StationaryControls {
    fn default() -> Self {
        Self {
            t0: 0.05,
            growth: 1.25,
            nodes: 8,
            tol: 1e-10,
            t_max: 1e8,
        }
    }
}

/// `∫₀^∞ exp(t L̂ₙ) f dt` with its last panel end.
pub fn integrate_semigroup(
    sg: &Semigroup,
    f: &CorrelationTensor,
    controls: &StationaryControls,
) -> Result<(CorrelationTensor, f64), HierarchyError> {
    let mut total = CorrelationTensor::zeros(f.order(), f.points());
    if f.sup_norm() == 0.0 {
        return Ok((total, 0.0));
    }
    let (unit_nodes, unit_weights) = gauss_legendre(controls.nodes, 0.0, 1.0);
    let mut history: Vec<(f64, f64)> = Vec::new();
    let mut previous_end: Option<(f64, f64)> = None;
    let (mut a, mut b) = (0.0, controls.t0);
    let mut panels = 0usize;
    loop {
        let width = b - a;
        let mut panel = CorrelationTensor::zeros(f.order(), f.points());
        for (x, w) in unit_nodes.iter().zip(&unit_weights) {
            panel.axpy(w * width, &sg.apply(a + x * width, f));
        }
        total.axpy(1.0, &panel);
        panels += 1;
        let mean = panel.sup_norm() / width;
        let end_norm = sg.apply(b, f).sup_norm();
        history.push((b, mean));

        if let Some(&(_, earlier)) = history.iter().rev().find(|(t, _)| *t <= b / 1000.0) {
            if mean >= 0.5 * earlier {
                return Err(HierarchyError::Divergence(DivergenceDiagnostics {
                    order: f.order(),
                    time: b,
                    integrand: mean,
                    integrand_three_decades_earlier: earlier,
                    integral: total.sup_norm(),
                }));
            }
        }
        if end_norm == 0.0 {
            return Ok((total, b));
        }
        if let Some((tp, np)) = previous_end {
            let p = Float::ln(np / end_norm) / Float::ln(b / tp);
            if panels >= 8 && p > 1.0 {
                let tail = end_norm * b / (p - 1.0);
                if tail <= controls.tol * total.sup_norm().max(f64::MIN_POSITIVE) {
                    return Ok((total, b));
                }
            }
        }
        previous_end = Some((b, end_norm));
        if b > controls.t_max {
            return Err(HierarchyError::Divergence(DivergenceDiagnostics {
                order: f.order(),
                time: b,
                integrand: mean,
                integrand_three_decades_earlier: f64::NAN,
                integral: total.sup_norm(),
            }));
        }
        a = b;
        b *= controls.growth;
    }
}

/// Stationary correlation functions of the dense backend.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStationary {
    pub rho: f64,
    /// Levels `1..=n`.
    pub tensors: Vec<CorrelationTensor>,
    /// `‖L̂ₗ (k⁽ˡ⁾ − ρˡ) + f⁽ˡ⁾‖∞` per level. On a critical model
    /// constants are annihilated and this is `‖L̂ₗ k⁽ˡ⁾ + f⁽ˡ⁾‖∞`.
    pub residuals: Vec<f64>,
    /// Time at which the integral of each level was cut.
    pub horizons: Vec<f64>,
}

/// `k⁽ˡ⁾ = ∫₀^∞ exp(t L̂ₗ) f⁽ˡ⁾[k⁽ˡ⁻¹⁾] dt + ρˡ`, starting from `k⁽¹⁾ ≡ ρ`.
pub fn stationary_dense(
    n: usize,
    tm: &TransformedModel,
    rho: f64,
    controls: &StationaryControls,
) -> Result<DenseStationary, HierarchyError> {
    let sg = Semigroup::new(tm)?;
    let p = tm.len();
    let mut tensors = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    let mut horizons = Vec::with_capacity(n);
    for l in 1..=n {
        if l == 1 {
            let k = CorrelationTensor::constant(1, p, rho);
            residuals.push(0.0);
            tensors.push(k);
            horizons.push(0.0);
            continue;
        }
        let f = source_f(l, tm, &tensors[l - 2])?;
        let (integral, horizon) = integrate_semigroup(&sg, &f, controls)?;
        let mut r = apply_lhat(l, tm, &integral)?;
        r.axpy(1.0, &f);
        let mut k = integral;
        let shift = Float::powi(rho, l as i32);
        k.values_mut().iter_mut().for_each(|v| *v += shift);
        residuals.push(r.sup_norm());
        tensors.push(k);
        horizons.push(horizon);
    }
    Ok(DenseStationary {
        rho,
        tensors,
        residuals,
        horizons,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub times: Vec<f64>,
    /// `‖k_t⁽ⁿ⁾ − k_ρ⁽ⁿ⁾‖∞`, or `‖k_t⁽ⁿ⁾ − ρⁿ‖∞` when no stationary solution exists.
    pub distances: Vec<f64>,
    pub stationary_exists: bool,
    pub pass: bool,
}

/// Distance of the Poisson-started solution from the stationary one along a
/// time grid. Without a stationary solution the growth away from the
/// initial data is reported instead and the check fails.
pub fn convergence_check_dense(
    n: usize,
    tm: &TransformedModel,
    rho: f64,
    times: &[f64],
    tol: f64,
    stationary: &StationaryControls,
    evolve_controls: &EvolveControls,
) -> Result<ConvergenceReport, HierarchyError> {
    let p = tm.len();
    let initial: Vec<CorrelationTensor> = (1..=n)
        .map(|l| CorrelationTensor::constant(l, p, Float::powi(rho, l as i32)))
        .collect();
    let traj = evolve(n, tm, &initial, times, evolve_controls)?;
    let (target, exists) = match stationary_dense(n, tm, rho, stationary) {
        Ok(s) => (s.tensors[n - 1].clone(), true),
        Err(HierarchyError::Divergence(_)) => (initial[n - 1].clone(), false),
        Err(e) => return Err(e),
    };
    let distances: Vec<f64> = traj.states.iter().map(|s| s[n - 1].distance(&target)).collect();
    let pass = exists && distances.last().is_some_and(|d| *d <= tol);
    Ok(ConvergenceReport {
        times: times.to_vec(),
        distances,
        stationary_exists: exists,
        pass,
    })
}

/// Poisson initial data at level `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonInitial {
    /// `ρⁿ ∏ Ψ(xᵢ)`, densities with respect to `m`.
    pub m_convention: CorrelationTensor,
    /// `ρⁿ`, densities with respect to `m̄ = Ψ m`.
    pub mbar_convention: CorrelationTensor,
}

pub fn poisson_initial(n: usize, rho: f64, psi: &[f64]) -> PoissonInitial {
    let p = psi.len();
    let c = Float::powi(rho, n as i32);
    PoissonInitial {
        m_convention: CorrelationTensor::from_fn(n, p, |idx| c * idx.iter().map(|&i| psi[i]).product::<f64>()),
        mbar_convention: CorrelationTensor::constant(n, p, c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criticality::{calibrate, ground_transform, SolverControls};
    use crate::model::{build_space, Boundary, DeathRates, Kernel, LatticeWindow, RateModel, SpaceSpec, Stencil};
    use alloc::vec;
    use nalgebra::DMatrix;

    fn two_point() -> TransformedModel {
        let space = build_space(SpaceSpec::finite(vec![1.0, 1.0])).unwrap();
        let b = DMatrix::from_row_slice(2, 2, &[0.2, 0.8, 0.5, 0.5]);
        TransformedModel::from_dense(space, b, vec![1.0, 1.0], None)
    }

    #[test]
    fn first_level_matches_closed_form() {
        let tm = two_point();
        let k0 = CorrelationTensor::from_fn(1, 2, |i| [1.0, 3.0][i[0]]);
        let times = [0.3, 1.0, 4.0];
        let traj = evolve(1, &tm, &[k0], &times, &EvolveControls::default()).unwrap();
        let (p0, p1) = (0.5 / 1.3, 0.8 / 1.3);
        let mean = p0 * 1.0 + p1 * 3.0;
        for (t, s) in times.iter().zip(&traj.states) {
            let e = (-1.3 * t).exp();
            let want = [mean + e * (1.0 - mean), mean + e * (3.0 - mean)];
            for x in 0..2 {
                assert!((s[0].get(&[x]) - want[x]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn second_level_matches_augmented_exponential() {
        let tm = two_point();
        let rho = 0.7;
        let g = tm.generator().unwrap();
        let id = DMatrix::<f64>::identity(2, 2);
        let l2 = g.kronecker(&id) + id.kronecker(&g);
        let f = source_f(2, &tm, &CorrelationTensor::constant(1, 2, rho)).unwrap();
        let mut aug = DMatrix::zeros(5, 5);
        aug.view_mut((0, 0), (4, 4)).copy_from(&l2);
        for i in 0..4 {
            aug[(i, 4)] = f.values()[i];
        }
        let initial = [CorrelationTensor::constant(1, 2, rho), CorrelationTensor::constant(2, 2, rho * rho)];
        let times = [0.5, 2.0];
        let traj = evolve(2, &tm, &initial, &times, &EvolveControls::default()).unwrap();
        for (t, s) in times.iter().zip(&traj.states) {
            let e = (&aug * *t).exp();
            for i in 0..4 {
                let want = e.row(i).iter().take(4).sum::<f64>() * rho * rho + e[(i, 4)];
                assert!((s[1].values()[i] - want).abs() < 1e-10);
                assert!(s[1].values()[i] >= 0.0);
            }
        }
    }

    #[test]
    fn finite_critical_model_diverges() {
        let tm = two_point();
        let err = stationary_dense(2, &tm, 1.0, &StationaryControls::default()).unwrap_err();
        assert!(matches!(err, HierarchyError::Divergence(_)));
    }

    #[test]
    fn leaky_window_has_small_residual() {
        let space = build_space(SpaceSpec::Lattice(LatticeWindow::new(3, 1, Boundary::Unbounded))).unwrap();
        let model = RateModel::new(Kernel::Stencil(Stencil::nearest_neighbor(3)), DeathRates::Constant(1.0));
        let (model, gs) = calibrate(&model, &space, &SolverControls::default()).unwrap();
        let tm = ground_transform(&model, &space, &gs).unwrap().dense_window();
        let s = stationary_dense(3, &tm, 0.5, &StationaryControls::default()).unwrap();
        assert_eq!(s.tensors[0].get(&[4]), 0.5);
        for r in &s.residuals {
            assert!(*r < 1e-8, "{r}");
        }
        assert!(s.tensors[1].is_symmetric(1e-12));
    }

    #[test]
    fn poisson_initial_conventions() {
        let p = poisson_initial(1, 0.5, &[2.0, 0.5]);
        assert_eq!(p.m_convention.values(), &[1.0, 0.25]);
        assert_eq!(p.mbar_convention.values(), &[0.5, 0.5]);
        assert_eq!(poisson_initial(3, 0.5, &[1.0]).mbar_convention.get(&[0, 0, 0]), 0.125);
        assert_eq!(poisson_initial(0, 0.5, &[1.0]).mbar_convention.values(), &[1.0]);
    }
}
