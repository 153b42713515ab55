use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use samplecx::basis::{CoeffTensor, TensorBasis};
use samplecx::exec::Exec;
use samplecx::measure::{draw_samples, Domain, SampleBatch, WeightFunction};
use samplecx::model::ModelClass;
use samplecx::solver::{
    phase_diagram, quasi_opt_check, quasi_opt_factor, solve_iht_rank1, solve_linear, write_phase_csv, IhtOptions,
    PhaseConfig, PhaseTarget, SamplingWeight,
};

fn targets(c: &CoeffTensor, batch: &SampleBatch) -> Vec<f64> {
    let basis = TensorBasis::legendre(&c.dims());
    (0..batch.len())
        .map(|i| c.eval(&basis, batch.point(i)).unwrap())
        .collect()
}

/// Weighted normal equations solved by Cholesky.
fn normal_equations(class_dims: &[usize], indices: &[Vec<usize>], batch: &SampleBatch, u: &[f64]) -> Vec<f64> {
    let basis = TensorBasis::legendre(class_dims);
    let cols: Vec<CoeffTensor> = indices
        .iter()
        .map(|i| CoeffTensor::unit(class_dims, i).unwrap())
        .collect();
    let n = batch.len();
    let a = DMatrix::from_fn(n, cols.len(), |i, j| cols[j].eval(&basis, batch.point(i)).unwrap());
    let w = DMatrix::from_diagonal(&DVector::from_column_slice(&batch.weights));
    let lhs = a.transpose() * &w * &a;
    let rhs = a.transpose() * &w * DVector::from_column_slice(u);
    lhs.cholesky().expect("full rank").solve(&rhs).iter().copied().collect()
}

#[test]
fn least_squares_matches_normal_equations() {
    let dims = vec![4, 3];
    let indices = vec![vec![0, 0], vec![1, 0], vec![0, 2], vec![3, 1], vec![2, 2]];
    let class = ModelClass::LinearSpan {
        dims: dims.clone(),
        indices: indices.clone(),
    };
    let w = WeightFunction::separable_optimal(&dims).unwrap();
    let batch = draw_samples(&Domain::new(2).unwrap(), &w, 40, 6).unwrap();
    let u: Vec<f64> = (0..batch.len())
        .map(|i| (batch.point(i)[0] * 2.0).sin() + batch.point(i)[1].powi(3))
        .collect();
    let r = solve_linear(&class, &batch, &u).unwrap();
    let oracle = normal_equations(&dims, &indices, &batch, &u);
    let est = r.estimate.to_dense_data();
    for (idx, c) in indices.iter().zip(oracle) {
        let k = samplecx::basis::flat_index(&dims, idx).unwrap();
        assert!((est[k] - c).abs() < 1e-9, "{idx:?}: {} vs {c}", est[k]);
    }
    assert!(!r.rank_deficient);
}

#[test]
fn least_squares_rejects_nonlinear_classes_and_bad_targets() {
    let batch = draw_samples(&Domain::new(2).unwrap(), &WeightFunction::Uniform, 10, 0).unwrap();
    assert!(solve_linear(&ModelClass::Rank1Cone { dims: vec![2, 2] }, &batch, &[0.0; 10]).is_err());
    assert!(solve_linear(&ModelClass::FullSpace { dims: vec![2, 2] }, &batch, &[0.0; 9]).is_err());
}

#[test]
fn iht_recovers_a_rank1_matrix() {
    let dims = [6, 5];
    let truth = CoeffTensor::rank1(vec![
        vec![1.0, 0.3, -0.2, 0.1, 0.0, 0.05],
        vec![0.5, -1.0, 0.25, 0.0, 0.1],
    ])
    .unwrap();
    let w = WeightFunction::separable_optimal(&dims).unwrap();
    let batch = draw_samples(&Domain::new(2).unwrap(), &w, 120, 13).unwrap();
    let r = solve_iht_rank1(&dims, &batch, &targets(&truth, &batch), IhtOptions::default()).unwrap();
    assert!(r.converged);
    assert!(r.estimate.distance(&truth).unwrap() / truth.norm() < 1e-6);
}

#[test]
fn iht_is_deterministic() {
    let dims = [4, 4, 3];
    let truth = CoeffTensor::rank1(vec![
        vec![1.0, 0.5, 0.0, 0.2],
        vec![0.1, 1.0, 0.3, 0.0],
        vec![1.0, 1.0, -1.0],
    ])
    .unwrap();
    let w = WeightFunction::separable_optimal(&dims).unwrap();
    let batch = draw_samples(&Domain::new(3).unwrap(), &w, 200, 2).unwrap();
    let t = targets(&truth, &batch);
    let a = solve_iht_rank1(&dims, &batch, &t, IhtOptions::default()).unwrap();
    let b = solve_iht_rank1(&dims, &batch, &t, IhtOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn quasi_opt_factor_values() {
    assert_eq!(quasi_opt_factor(0.0), 3.0);
    assert!((quasi_opt_factor(0.75) - 5.0).abs() < 1e-14);
}

#[test]
fn quasi_opt_check_on_an_exact_rank1_target() {
    let dims = vec![3, 3];
    let u = CoeffTensor::rank1(vec![vec![1.0, 0.2, 0.0], vec![0.3, 1.0, -0.4]]).unwrap();
    let w = WeightFunction::separable_optimal(&dims).unwrap();
    let batch = draw_samples(&Domain::new(2).unwrap(), &w, 80, 1).unwrap();
    let r = solve_iht_rank1(&dims, &batch, &targets(&u, &batch), IhtOptions::default()).unwrap();
    let class = ModelClass::Rank1Cone { dims };
    let q = quasi_opt_check(&u, &class, &batch, &w, &r, 0.5).unwrap();
    assert!(q.tail_norm < 1e-12);
    assert!(q.lhs < 1e-8);
    assert!(q.residual_ok);
    let q = quasi_opt_check(&u, &class, &batch, &w, &r, 1.2).unwrap();
    assert!(!q.applicable && !q.pass);
}

#[test]
fn phase_csv_layout_and_sorting() {
    let cfg = PhaseConfig {
        orders: vec![3, 2],
        sample_counts: vec![40, 10],
        d: 3,
        target: PhaseTarget::Exp,
        trials: 2,
        seed: 9,
        sampling: SamplingWeight::Optimal,
        max_iters: 200,
        tol: 1e-10,
    };
    let cells = phase_diagram(&cfg, Exec::Parallel).unwrap();
    let keys: Vec<(usize, usize)> = cells.iter().map(|c| (c.order, c.n)).collect();
    assert_eq!(keys, vec![(2, 10), (2, 40), (3, 10), (3, 40)]);
    // the exponential's tail beyond degree 2 is small but nonzero
    assert!(cells.iter().all(|c| c.tail_norm > 0.0 && c.tail_norm < 0.1));
    let mut out = Vec::new();
    write_phase_csv(&cells, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("M,n,trials,mean_rel_error,success_rate,seed"));
    assert_eq!(lines.count(), 4);
    assert_eq!(cells, phase_diagram(&cfg, Exec::Sequential).unwrap());
}

#[test]
fn phase_diagram_reports_oversized_cells() {
    let cfg = PhaseConfig {
        orders: vec![7],
        sample_counts: vec![10],
        d: 15,
        target: PhaseTarget::Ones,
        trials: 1,
        seed: 0,
        sampling: SamplingWeight::Uniform,
        max_iters: 10,
        tol: 1e-10,
    };
    let cells = phase_diagram(&cfg, Exec::Sequential).unwrap();
    assert!(cells[0].failed.is_some());
    assert!(cells[0].mean_rel_error.is_nan());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn iht_residuals_never_increase(seed in 0u64..1000, n in 10usize..60) {
        let dims = [4, 4];
        let batch = draw_samples(&Domain::new(2).unwrap(), &WeightFunction::Uniform, n, seed).unwrap();
        let u: Vec<f64> = (0..n).map(|i| (3.0 * batch.point(i)[0]).cos() * batch.point(i)[1]).collect();
        let opts = IhtOptions { max_iters: 100, ..IhtOptions::default() };
        let r = solve_iht_rank1(&dims, &batch, &u, opts).unwrap();
        prop_assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(r.residual <= r.history[0] + 1e-12);
    }

    #[test]
    fn least_squares_residual_is_minimal(seed in 0u64..1000, shift in -1.0f64..1.0) {
        let class = ModelClass::FullSpace { dims: vec![3] };
        let batch = draw_samples(&Domain::new(1).unwrap(), &WeightFunction::Uniform, 20, seed).unwrap();
        let u: Vec<f64> = batch.points.iter().map(|t| t.exp()).collect();
        let r = solve_linear(&class, &batch, &u).unwrap();
        // perturbing the minimizer can only increase the residual
        let other = r.estimate.add_scaled(shift, &CoeffTensor::unit(&[3], &[1]).unwrap()).unwrap();
        let basis = TensorBasis::legendre(&[3]);
        let resid = |c: &CoeffTensor| -> f64 {
            (0..batch.len()).map(|i| (u[i] - c.eval(&basis, batch.point(i)).unwrap()).powi(2)).sum::<f64>()
        };
        prop_assert!(resid(&r.estimate) <= resid(&other) + 1e-10);
    }
}
