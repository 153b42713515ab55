use std::sync::Arc;

use proptest::prelude::*;
use samplecx::basis::{legendre_values, CoeffTensor};
use samplecx::exec::Exec;
use samplecx::measure::{draw_samples, empirical_norm, empirical_norm_coeffs, Domain, ModeDensity, WeightFunction};
use samplecx::model::ModelClass;
use samplecx::rip::{derive_seed, rip_delta_linear, rip_delta_mc, rip_probability, wilson_interval, RipMethod};
use samplecx::variation::{optimal_weight, variation_exact};
use statrs::distribution::{ContinuousCDF, Normal};

fn span(d: usize) -> ModelClass {
    ModelClass::LinearSpan {
        dims: vec![d],
        indices: (0..d).map(|k| vec![k]).collect(),
    }
}

/// Kolmogorov–Smirnov statistic of a sample against a CDF.
fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn optimal_density_for_two_functions_matches_closed_form_cdf() {
    // p = (b0² + b1²)/2 = (1 + 3t²)/2 against dρ = dt/2, so F(t) = (t + t³ + 2)/4
    let w = WeightFunction::separable_optimal(&[2]).unwrap();
    let batch = draw_samples(&Domain::new(1).unwrap(), &w, 20_000, 3).unwrap();
    let d = ks_statistic(batch.points.clone(), |t| (t + t.powi(3) + 2.0) / 4.0);
    // 1% critical value 1.63/√n
    assert!(d < 1.63 / (20_000f64).sqrt(), "KS statistic {d}");
    let p = ModeDensity::legendre_optimal(2).unwrap();
    for t in [-1.0, -0.4, 0.0, 0.25, 0.9, 1.0] {
        assert!((p.cdf(t) - (t + t.powi(3) + 2.0) / 4.0).abs() < 1e-6);
        assert!((p.density(t) - (1.0 + 3.0 * t * t) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn uniform_sampling_passes_ks() {
    let batch = draw_samples(&Domain::new(1).unwrap(), &WeightFunction::Uniform, 20_000, 8).unwrap();
    let d = ks_statistic(batch.points.clone(), |t| (t + 1.0) / 2.0);
    assert!(d < 1.63 / (20_000f64).sqrt());
}

/// The importance weights make ‖b_j‖²_y an unbiased estimate of 1.
fn check_unbiased(weight: &WeightFunction, d: usize, seed: u64) {
    let n = 100_000;
    let batch = draw_samples(&Domain::new(1).unwrap(), weight, n, seed).unwrap();
    let mut v = vec![0.0; d];
    for j in 0..d {
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                legendre_values(batch.points[i], &mut v);
                batch.weights[i] * v[j] * v[j]
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 5.0 * se + 1e-12, "j={j}: mean {mean}, se {se}");
    }
}

#[test]
fn weighted_samples_are_unbiased() {
    check_unbiased(&WeightFunction::separable_optimal(&[6]).unwrap(), 6, 1);
    let k = Arc::new(variation_exact(&span(6)).unwrap());
    let w = optimal_weight(k, &Domain::new(1).unwrap()).unwrap();
    check_unbiased(&w, 6, 2);
}

#[test]
fn optimal_weights_bound_every_weighted_basis_function() {
    // w·b_j² ≤ w·𝕂 = d, so each sample term is at most d
    let d = 7;
    let w = WeightFunction::separable_optimal(&[d]).unwrap();
    let batch = draw_samples(&Domain::new(1).unwrap(), &w, 5000, 4).unwrap();
    let mut v = vec![0.0; d];
    for i in 0..batch.len() {
        legendre_values(batch.points[i], &mut v);
        let k: f64 = v.iter().map(|x| x * x).sum();
        assert!((batch.weights[i] * k - d as f64).abs() < 1e-9);
    }
}

#[test]
fn empirical_norms_agree() {
    let batch = draw_samples(&Domain::new(2).unwrap(), &WeightFunction::Uniform, 300, 5).unwrap();
    let c = CoeffTensor::rank1(vec![vec![0.5, 1.0], vec![1.0, -2.0, 0.25]]).unwrap();
    let basis = samplecx::TensorBasis::legendre(&[2, 3]);
    let a = empirical_norm(|y| c.eval(&basis, y).unwrap(), &batch);
    let b = empirical_norm_coeffs(&c, &batch).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn wilson_interval_matches_statrs_quantile() {
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.975);
    for (k, n) in [(0usize, 20usize), (3, 20), (50, 100), (999, 1000), (1000, 1000)] {
        let p = k as f64 / n as f64;
        let nf = n as f64;
        let center = (p + z * z / (2.0 * nf)) / (1.0 + z * z / nf);
        let half = z / (1.0 + z * z / nf) * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt();
        let (lo, hi) = wilson_interval(k, n);
        assert!((lo - (center - half).max(0.0)).abs() < 1e-12);
        assert!((hi - (center + half).min(1.0)).abs() < 1e-12);
        assert!(lo <= p && p <= hi);
    }
}

#[test]
fn failure_rate_lies_in_its_wilson_interval_and_is_deterministic() {
    let class = span(3);
    let run = |exec| {
        rip_probability(
            &class,
            &WeightFunction::Uniform,
            40,
            0.5,
            300,
            17,
            RipMethod::Spectral,
            exec,
        )
        .unwrap()
    };
    let a = run(Exec::Sequential);
    let b = run(Exec::Parallel);
    assert_eq!(a, b);
    assert!(a.wilson_lo <= a.rate && a.rate <= a.wilson_hi);
    // ‖𝕂‖_∞ = d² for the first d Legendre polynomials under w ≡ 1
    assert!((a.variation_sup - 9.0).abs() < 1e-9);
}

#[test]
fn derived_seeds_are_distinct() {
    let mut seen = std::collections::HashSet::new();
    for base in 0..50u64 {
        for stream in 0..20u64 {
            assert!(seen.insert(derive_seed(base, stream)));
        }
    }
}

#[test]
fn rip_rejects_bad_arguments() {
    let class = span(2);
    let w = WeightFunction::Uniform;
    assert!(rip_probability(&class, &w, 10, 1.0, 10, 0, RipMethod::Spectral, Exec::Sequential).is_err());
    assert!(rip_probability(&class, &w, 10, 0.5, 0, 0, RipMethod::Spectral, Exec::Sequential).is_err());
    let batch = draw_samples(&Domain::new(1).unwrap(), &w, 10, 0).unwrap();
    assert!(rip_delta_linear(&ModelClass::Rank1Cone { dims: vec![2, 2] }, &batch).is_err());
    assert!(rip_delta_mc(&class, &batch, 0, 0, Exec::Sequential).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn monte_carlo_delta_is_a_lower_bound(seed in 0u64..10_000, d in 1usize..6, n in 5usize..60) {
        let class = span(d);
        let batch = draw_samples(&Domain::new(1).unwrap(), &WeightFunction::Uniform, n, seed).unwrap();
        let spectral = rip_delta_linear(&class, &batch).unwrap();
        let mc = rip_delta_mc(&class, &batch, 500, seed, Exec::Sequential).unwrap();
        prop_assert!(mc.delta_hat <= spectral.delta_hat + 1e-12);
        prop_assert!(mc.min_ratio >= spectral.min_ratio - 1e-12);
        prop_assert!(mc.max_ratio <= spectral.max_ratio + 1e-12);
    }

    #[test]
    fn samples_stay_in_the_domain(seed in 0u64..10_000, d in 1usize..10) {
        let w = WeightFunction::separable_optimal(&[d, d]).unwrap();
        let batch = draw_samples(&Domain::new(2).unwrap(), &w, 50, seed).unwrap();
        prop_assert!(batch.points.iter().all(|t| (-1.0..=1.0).contains(t)));
        prop_assert!(batch.weights.iter().all(|w| *w > 0.0 && w.is_finite()));
    }
}
