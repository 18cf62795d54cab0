use contactlab_core::criticality::{calibrate, ground_transform, solve_ground_state, SolverControls};
use contactlab_core::hierarchy::{apply_lhat, evolve, source_f, CorrelationTensor, EvolveControls};
use contactlab_core::model::{build_space, DeathRates, Kernel, RateModel, SpaceSpec, StateSpace};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn model(n: usize, a: &[f64], v: &[f64], w: &[f64]) -> (StateSpace, RateModel) {
    let space = build_space(SpaceSpec::finite(w.to_vec())).unwrap();
    let a = DMatrix::from_row_slice(n, n, a);
    (space, RateModel::new(Kernel::Dense(a), DeathRates::PerPoint(v.to_vec())))
}

fn inputs() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, Vec<f64>, Vec<usize>)> {
    (2usize..=4).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(0.05f64..1.0, n * n),
            prop::collection::vec(0.5f64..2.0, n),
            prop::collection::vec(0.5f64..2.0, n),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relabelling_points_permutes_ground_state((n, a, v, w, perm) in inputs()) {
        let (s, m) = model(n, &a, &v, &w);
        let pa: Vec<f64> = (0..n * n).map(|i| a[perm[i / n] * n + perm[i % n]]).collect();
        let pv: Vec<f64> = perm.iter().map(|&i| v[i]).collect();
        let pw: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
        let (ps, pm) = model(n, &pa, &pv, &pw);
        let c = SolverControls::default();
        let g = solve_ground_state(&m, &s, &c).unwrap();
        let pg = solve_ground_state(&pm, &ps, &c).unwrap();
        prop_assert!((g.eigenvalue - pg.eigenvalue).abs() <= 1e-12 * g.eigenvalue);
        for (i, &p) in perm.iter().enumerate() {
            prop_assert!((pg.psi[i] - g.psi[p]).abs() <= 1e-11);
        }
    }

    #[test]
    fn lhat_commutes_with_axis_permutations((n, a, v, w, _) in inputs(), seed in 0u64..1000) {
        let (s, m) = model(n, &a, &v, &w);
        let (scaled, gs) = calibrate(&m, &s, &SolverControls::default()).unwrap();
        let tm = ground_transform(&scaled, &s, &gs).unwrap();
        let k = CorrelationTensor::from_fn(3, n, |i| ((i[0] * 7 + i[1] * 3 + i[2]) as u64 ^ seed) as f64 % 5.0);
        let perm = [2, 0, 1];
        let lhs = apply_lhat(3, &tm, &k.permuted(&perm)).unwrap();
        let rhs = apply_lhat(3, &tm, &k).unwrap().permuted(&perm);
        prop_assert!(lhs.distance(&rhs) <= 1e-12);
    }
}

#[test]
fn source_preserves_symmetry_along_the_flow() {
    let n = 3;
    let (s, m) = model(n, &[0.2, 0.9, 0.1, 0.5, 0.1, 0.7, 0.3, 0.6, 0.2], &[1.0, 1.5, 2.0], &[1.0, 0.5, 2.0]);
    let (scaled, gs) = calibrate(&m, &s, &SolverControls::default()).unwrap();
    let tm = ground_transform(&scaled, &s, &gs).unwrap();
    let k1 = CorrelationTensor::from_fn(1, n, |i| 0.3 + 0.1 * i[0] as f64);
    let f = source_f(2, &tm, &k1).unwrap();
    assert!(f.is_symmetric(1e-15));
    let k2 = CorrelationTensor::from_fn(2, n, |i| 0.25 + 0.01 * (i[0] + i[1]) as f64);
    let traj = evolve(2, &tm, &[k1, k2], &[0.5, 1.0], &EvolveControls::default()).unwrap();
    for state in &traj.states {
        assert!(state[1].is_symmetric(1e-13));
    }
}
