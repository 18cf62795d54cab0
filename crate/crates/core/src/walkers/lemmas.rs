use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use super::law::LatticeSampler;
use super::pair::RegularEngine;
use super::path::holding;
use super::WalkerError;
use crate::criticality::{ThetaKernel, TransformedModel};
use crate::replicas::{accumulate, ReplicaExecutor};
use crate::stats::poisson_cdf;

const HEAT_DOMAIN: u64 = 0x6865_6174_0000_0000;
const MARK_DOMAIN: u64 = 0x6d61_726b_0000_0000;

#[derive(Debug, Clone, PartialEq)]
pub struct HeatRow {
    pub t: f64,
    /// `E_x α(ξ(t) − ξ₁)`, singular part included.
    pub alpha_mean: f64,
    /// `E_x b(X(t), y)`.
    pub b_mean: f64,
    pub b_stderr: f64,
    /// `ϰ E_x α(ξ(t) − ξ₁)`.
    pub estimate: f64,
    pub stderr: f64,
    /// `estimate · t^{d/2}`.
    pub scaled: f64,
    pub scaled_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatReport {
    /// `max Q(s,s')/q(s)`.
    pub kappa: f64,
    pub rows: Vec<HeatRow>,
    /// `sup_t estimate · t^{d/2}` over the grid.
    pub sup_scaled: f64,
    /// Every point of the last decade lies within three combined standard
    /// errors of the last point.
    pub flat: bool,
    /// `E b ≤ ϰ E α` within three standard errors at every time.
    pub dominated: bool,
    pub pass: bool,
}

/// Heat-kernel decay of one walker from `(0, s0)` towards `(ξ₁, s₁)`.
///
/// The no-jump part `e^{−v(s₀)t} α(−ξ₁)` is exact; the last `regular_terms`
/// jump displacements are averaged analytically with convolution powers.
#[allow(clippy::too_many_arguments)]
pub fn heat_bound_check<E: ReplicaExecutor + ?Sized>(
    tm: &TransformedModel,
    times: &[f64],
    s0: usize,
    xi1: &[i64],
    s1: usize,
    replicas: u64,
    regular_terms: usize,
    exec: &E,
    seed: u64,
) -> Result<HeatReport, WalkerError> {
    let law = LatticeSampler::new(tm)?;
    if s0 >= law.n_marks() || s1 >= law.n_marks() || xi1.len() != law.dim {
        return Err(WalkerError::InvalidStart);
    }
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && t.is_finite())) || replicas < 2 {
        return Err(WalkerError::InvalidGrid("times must be positive and replicas at least 2"));
    }
    let engine = RegularEngine::new(&law, tm, regular_terms)?;
    let targets = [(xi1.to_vec(), s1)];
    let kappa = law.coupling_sup();
    let (acc, _) = accumulate(exec, seed, HEAT_DOMAIN, replicas, times.len() * 2, |_, rng, buf| {
        engine.sample(s0, times, &targets, rng, buf);
        true
    });
    let half = law.dim as f64 / 2.0;
    let rows: Vec<HeatRow> = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (sa, sb) = engine.singular(s0, t, xi1, s1);
            let alpha_mean = acc.mean(2 * i) + sa;
            let scale = Float::powf(t, half);
            let stderr = kappa * acc.stderr(2 * i);
            HeatRow {
                t,
                alpha_mean,
                b_mean: acc.mean(2 * i + 1) + sb,
                b_stderr: acc.stderr(2 * i + 1),
                estimate: kappa * alpha_mean,
                stderr,
                scaled: kappa * alpha_mean * scale,
                scaled_stderr: stderr * scale,
            }
        })
        .collect();
    let last = rows.last().expect("non-empty");
    let t_last = last.t;
    let flat = rows.iter().filter(|r| r.t >= t_last / 10.0).all(|r| {
        let se = Float::sqrt(r.scaled_stderr * r.scaled_stderr + last.scaled_stderr * last.scaled_stderr);
        (r.scaled - last.scaled).abs() <= 3.0 * se
    });
    let dominated = rows
        .iter()
        .all(|r| r.b_mean <= r.estimate + 3.0 * Float::sqrt(r.b_stderr * r.b_stderr + r.stderr * r.stderr));
    let sup_scaled = rows.iter().map(|r| r.scaled).fold(0.0, f64::max);
    Ok(HeatReport {
        kappa,
        rows,
        sup_scaled,
        flat,
        dominated,
        pass: flat && dominated,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonCell {
    pub start_mark: usize,
    pub t: f64,
    pub k: u64,
    /// Monte Carlo `P(n(t) ≤ k)`.
    pub estimate: f64,
    pub stderr: f64,
    /// `P_{λ₀}(n(t) ≤ k)`.
    pub exact: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonDominationReport {
    pub lambda0: f64,
    pub cells: Vec<PoissonCell>,
    pub pass: bool,
}

/// Jump counts of the mark chain with rates `v` and transitions
/// `Θ(s,·)ν` against a Poisson process of rate `λ₀ ≤ min v`. Every start
/// mark is checked on the full `(t, k)` grid.
///
/// The standard error uses `p̃ = (count + 1)/(N + 2)` so that cells with
/// estimate exactly 0 or 1 keep a positive error.
#[allow(clippy::too_many_arguments)]
pub fn poisson_domination_check<E: ReplicaExecutor + ?Sized>(
    v: &[f64],
    theta: &ThetaKernel,
    lambda0: Option<f64>,
    times: &[f64],
    ks: &[u64],
    replicas: u64,
    exec: &E,
    seed: u64,
) -> Result<PoissonDominationReport, WalkerError> {
    let m = v.len();
    if m == 0 || theta.nu.len() != m || v.iter().any(|r| !(*r > 0.0)) {
        return Err(WalkerError::InvalidGrid("rates must be positive, one per mark"));
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || replicas < 2 {
        return Err(WalkerError::InvalidGrid("times must be non-negative and replicas at least 2"));
    }
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda0 = lambda0.unwrap_or(vmin);
    if !(lambda0 > 0.0 && lambda0 <= vmin) {
        return Err(WalkerError::InvalidGrid("lambda0 must lie in (0, min v]"));
    }
    let rows: Vec<Option<WeightedAliasIndex<f64>>> = (0..m)
        .map(|s| {
            let w: Vec<f64> = (0..m).map(|t| theta.theta[(s, t)] * theta.nu[t]).collect();
            WeightedAliasIndex::new(w).ok()
        })
        .collect();
    let horizon = times.iter().copied().fold(0.0, f64::max);
    let width = times.len() * ks.len();
    let mut cells = Vec::with_capacity(m * width);
    for s0 in 0..m {
        let (acc, _) = accumulate(exec, seed, MARK_DOMAIN + s0 as u64, replicas, width, |_, rng, buf| {
            let mut jumps: Vec<f64> = Vec::new();
            let mut s = s0;
            let mut t = 0.0;
            loop {
                t += holding(v[s], rng);
                if t > horizon {
                    break;
                }
                jumps.push(t);
                if let Some(a) = &rows[s] {
                    s = a.sample(rng);
                }
            }
            for (i, &tt) in times.iter().enumerate() {
                let n = jumps.partition_point(|&u| u <= tt) as u64;
                for (j, &k) in ks.iter().enumerate() {
                    buf[i * ks.len() + j] = if n <= k { 1.0 } else { 0.0 };
                }
            }
            true
        });
        let nrep = acc.count as f64;
        for (i, &t) in times.iter().enumerate() {
            for (j, &k) in ks.iter().enumerate() {
                let estimate = acc.mean(i * ks.len() + j);
                let p = (estimate * nrep + 1.0) / (nrep + 2.0);
                let stderr = Float::sqrt(p * (1.0 - p) / nrep);
                let exact = poisson_cdf(lambda0 * t, k);
                cells.push(PoissonCell {
                    start_mark: s0,
                    t,
                    k,
                    estimate,
                    stderr,
                    exact,
                    pass: estimate <= exact + 3.0 * stderr,
                });
            }
        }
    }
    let pass = cells.iter().all(|c| c.pass);
    Ok(PoissonDominationReport { lambda0, cells, pass })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerTailRow {
    pub t: f64,
    /// `⌊λ₀ t / 2⌋`.
    pub k: u64,
    /// `P_{λ₀}(n(t) ≤ k)`.
    pub exact: f64,
    /// `M̃ t e^{−B λ₀ t}`.
    pub bound: f64,
    pub ratio: f64,
    /// Times below `2/λ₀` are listed but not judged.
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerTailReport {
    pub lambda0: f64,
    /// `(1 − ln 2)/2`.
    pub b: f64,
    /// `M_scale · λ₀ / 2`.
    pub m_tilde: f64,
    pub rows: Vec<LowerTailRow>,
    pub max_ratio: f64,
    pub pass: bool,
}

/// `P_{λ₀}(n(t) ≤ ⌊λ₀t/2⌋) ≤ M̃ t e^{−Bλ₀t}` with `B = (1 − ln 2)/2`,
/// `M̃ = M_scale λ₀ / 2`, evaluated exactly.
pub fn lower_tail_bound_check(lambda0: f64, times: &[f64], m_scale: f64) -> Result<LowerTailReport, WalkerError> {
    if !(lambda0 > 0.0 && lambda0.is_finite()) || !(m_scale > 0.0) {
        return Err(WalkerError::InvalidGrid("lambda0 and M_scale must be positive"));
    }
    let b = (1.0 - core::f64::consts::LN_2) / 2.0;
    let m_tilde = m_scale * lambda0 / 2.0;
    let rows: Vec<LowerTailRow> = times
        .iter()
        .map(|&t| {
            let k = Float::floor(lambda0 * t / 2.0) as u64;
            let exact = poisson_cdf(lambda0 * t, k);
            let bound = m_tilde * t * Float::exp(-b * lambda0 * t);
            LowerTailRow {
                t,
                k,
                exact,
                bound,
                ratio: exact / bound,
                excluded: t < 2.0 / lambda0,
            }
        })
        .collect();
    let judged: Vec<&LowerTailRow> = rows.iter().filter(|r| !r.excluded).collect();
    let max_ratio = judged.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(LowerTailReport {
        lambda0,
        b,
        m_tilde,
        pass: !judged.is_empty() && max_ratio <= 1.0,
        rows,
        max_ratio,
    })
}

/// Log-spaced grid of `count` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (a, b) = (Float::ln(lo), Float::ln(hi));
    (0..count)
        .map(|i| Float::exp(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replicas::Sequential;
    use nalgebra::DMatrix;

    #[test]
    fn lower_tail_reference_value() {
        let r = lower_tail_bound_check(1.0, &[10.0], 1.0).unwrap();
        assert_eq!(r.rows[0].k, 5);
        assert!((r.rows[0].exact - 0.067085962879).abs() < 1e-10);
        assert!(r.pass);
        assert!((r.b - 0.153426409720).abs() < 1e-11);
    }

    #[test]
    fn lower_tail_excludes_small_times() {
        let r = lower_tail_bound_check(2.0, &log_grid(0.1, 50.0, 30), 1.0).unwrap();
        assert!(r.rows[0].excluded);
        assert!(r.pass && r.max_ratio.is_finite());
    }

    #[test]
    fn poisson_domination_two_marks() {
        let theta = ThetaKernel {
            theta: DMatrix::from_element(2, 2, 1.0),
            nu: vec![0.5, 0.5],
        };
        let r = poisson_domination_check(&[1.0, 3.0], &theta, Some(1.0), &[2.0], &[2], 4000, &Sequential, 3).unwrap();
        assert!(r.pass);
        assert!((r.cells[0].exact - 0.676676416183).abs() < 1e-10);
    }

    #[test]
    fn equal_rates_match_poisson() {
        let theta = ThetaKernel {
            theta: DMatrix::from_element(1, 1, 1.0),
            nu: vec![1.0],
        };
        let r = poisson_domination_check(&[1.5], &theta, None, &[1.0, 3.0], &[0, 2, 5], 20000, &Sequential, 9).unwrap();
        for c in &r.cells {
            assert!((c.estimate - c.exact).abs() <= 4.0 * c.stderr, "{c:?}");
        }
    }

    #[test]
    fn lambda_above_min_rejected() {
        let theta = ThetaKernel {
            theta: DMatrix::from_element(1, 1, 1.0),
            nu: vec![1.0],
        };
        assert!(poisson_domination_check(&[1.0], &theta, Some(2.0), &[1.0], &[1], 10, &Sequential, 0).is_err());
    }
}
