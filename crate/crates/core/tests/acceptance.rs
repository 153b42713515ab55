//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use samplecx::basis::{legendre_values, CoeffTensor, TensorBasis};
use samplecx::exec::Exec;
use samplecx::geometry::{
    check_hausdorff_rates, check_manifold_projection, check_tangent_projection, klimit_check, reach_lowrank_ball,
    reach_perturbation_check, LocalBoundConfig, ManifoldChart,
};
use samplecx::grid::Grid;
use samplecx::measure::{draw_samples, Domain, WeightFunction};
use samplecx::model::lowrank::singular_values;
use samplecx::model::ModelClass;
use samplecx::rip::{rip_delta_linear, rip_delta_mc, rip_probability, RipMethod};
use samplecx::solver::{
    phase_diagram, quasi_opt_check, solve_iht_rank1, IhtOptions, PhaseConfig, PhaseTarget, SamplingWeight,
};
use samplecx::variation::{optimal_weight, variation_estimate, variation_exact, variation_norms};

type Outcome = Result<String, String>;

fn span(d: usize) -> ModelClass {
    ModelClass::LinearSpan {
        dims: vec![d],
        indices: (0..d).map(|k| vec![k]).collect(),
    }
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn legendre_norms() -> Outcome {
    let grid = Grid::standard(1).map_err(|e| e.to_string())?;
    let mut worst_sup: f64 = 0.0;
    let mut worst_l1: f64 = 0.0;
    for d in 1..=15 {
        let k = variation_exact(&span(d)).map_err(|e| e.to_string())?;
        let r = variation_norms(&k, &WeightFunction::Uniform, &grid, Exec::Parallel).map_err(|e| e.to_string())?;
        let dd = d as f64;
        worst_sup = worst_sup.max((r.sup_norm - dd * dd).abs());
        worst_l1 = worst_l1.max((r.l1_norm - dd).abs());
    }
    ensure(
        worst_sup <= 1e-9 && worst_l1 <= 1e-8,
        format!("max |sup - d^2| = {worst_sup:.2e} (tol 1e-9), max |l1 - d| = {worst_l1:.2e} (tol 1e-8)"),
    )
}

fn optimal_weight_identity() -> Outcome {
    let grid = Grid::standard(1).map_err(|e| e.to_string())?;
    let domain = Domain::new(1).map_err(|e| e.to_string())?;
    let mut worst_prod: f64 = 0.0;
    let mut worst_int: f64 = 0.0;
    for d in 1..=15 {
        let k = Arc::new(variation_exact(&span(d)).map_err(|e| e.to_string())?);
        let w = optimal_weight(k.clone(), &domain).map_err(|e| e.to_string())?;
        for y in grid.iter() {
            let p = w.value(y).map_err(|e| e.to_string())? * k.eval(y).map_err(|e| e.to_string())?;
            worst_prod = worst_prod.max((p - d as f64).abs());
        }
        let inv = w.inverse_integral(&domain).map_err(|e| e.to_string())?;
        worst_int = worst_int.max((inv - 1.0).abs());
    }
    ensure(
        worst_prod <= 1e-8 && worst_int <= 1e-8,
        format!("max |w K - d| = {worst_prod:.2e}, max |int 1/w - 1| = {worst_int:.2e} (tol 1e-8)"),
    )
}

fn rank1_witness() -> Outcome {
    let mut worst_witness: f64 = 0.0;
    let mut worst_mc = f64::NEG_INFINITY;
    for m in [2usize, 3] {
        for d in [2usize, 5] {
            let dims = vec![d; m];
            let class = ModelClass::Rank1Cone { dims: dims.clone() };
            let exact = variation_exact(&class).map_err(|e| e.to_string())?;
            let grid = Grid::uniform(m, 100, 11 + m as u64 * 7 + d as u64).map_err(|e| e.to_string())?;
            let basis = TensorBasis::legendre(&dims);
            for y in grid.iter() {
                // a = ⊗ b(y_m)/‖b(y_m)‖ attains Π_m Σ_k b_k(y_m)²
                let mut product = 1.0;
                let factors: Vec<Vec<f64>> = y
                    .iter()
                    .map(|&t| {
                        let mut v = vec![0.0; d];
                        legendre_values(t, &mut v);
                        let n = v.iter().map(|x| x * x).sum::<f64>();
                        product *= n;
                        v.iter().map(|x| x / n.sqrt()).collect()
                    })
                    .collect();
                let a = CoeffTensor::rank1(factors).map_err(|e| e.to_string())?;
                let value = a.eval(&basis, y).map_err(|e| e.to_string())?.powi(2);
                let k = exact.eval(y).map_err(|e| e.to_string())?;
                worst_witness = worst_witness
                    .max((value - k).abs() / k.max(1.0))
                    .max((product - k).abs() / k.max(1.0));
            }
            let mc = variation_estimate(&class, 10_000, 5, Exec::Parallel).map_err(|e| e.to_string())?;
            let est = mc.eval_many(&grid, Exec::Parallel).map_err(|e| e.to_string())?;
            for (y, e) in grid.iter().zip(est) {
                let k = exact.eval(y).map_err(|e| e.to_string())?;
                worst_mc = worst_mc.max(e - k);
            }
        }
    }
    ensure(
        worst_witness <= 1e-10 && worst_mc <= 1e-12,
        format!("witness error {worst_witness:.2e} (tol 1e-10), max MC - exact = {worst_mc:.2e} (must be <= 0)"),
    )
}

fn spectral_vs_mc() -> Outcome {
    let classes = [span(2), span(3), span(4), ModelClass::FullSpace { dims: vec![2, 2] }];
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for (c, class) in classes.iter().enumerate() {
        let m = class.dims().len();
        let domain = Domain::new(m).map_err(|e| e.to_string())?;
        for b in 0..10u64 {
            let seed = 1000 * c as u64 + b;
            let batch = draw_samples(&domain, &WeightFunction::Uniform, 50, seed).map_err(|e| e.to_string())?;
            let exact = rip_delta_linear(class, &batch).map_err(|e| e.to_string())?;
            let mc = rip_delta_mc(class, &batch, 100_000, seed + 77, Exec::Parallel).map_err(|e| e.to_string())?;
            let ratio = mc.delta_hat / exact.delta_hat;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    ensure(
        lo >= 0.95 && hi <= 1.0 + 1e-12,
        format!("MC/spectral ratio in [{lo:.4}, {hi:.4}] over 40 batches (need [0.95, 1])"),
    )
}

fn hoeffding_shape() -> Outcome {
    let class = ModelClass::Singleton {
        element: CoeffTensor::unit(&[2], &[1]).map_err(|e| e.to_string())?,
    };
    let mut rows = Vec::new();
    for (i, n) in [25usize, 50, 100, 200, 400].into_iter().enumerate() {
        let r = rip_probability(
            &class,
            &WeightFunction::Uniform,
            n,
            0.3,
            10_000,
            10_000 * i as u64,
            RipMethod::MonteCarlo { num_test: 1 },
            Exec::Parallel,
        )
        .map_err(|e| e.to_string())?;
        rows.push(r);
    }
    let mut ok = true;
    let mut detail = Vec::new();
    for r in &rows {
        let bound = 2.0 * (-r.exponent).exp() + 3.0 * r.standard_error();
        ok &= r.rate <= bound;
        detail.push(format!("n={} rate={:.4} bound={:.4}", r.n, r.rate, bound));
    }
    let monotone = rows
        .windows(2)
        .all(|w| w[1].rate <= w[0].rate || w[1].wilson_lo <= w[0].wilson_hi);
    let sup_ok = rows.iter().all(|r| (r.variation_sup - 3.0).abs() < 1e-12);
    ensure(
        ok && monotone && sup_ok,
        format!(
            "{}; monotone up to Wilson overlap: {monotone}; sup K = 3: {sup_ok}",
            detail.join(", ")
        ),
    )
}

fn phase_trend() -> Outcome {
    let cfg = PhaseConfig {
        orders: vec![2],
        sample_counts: vec![15, 50, 150, 500],
        d: 15,
        target: PhaseTarget::Ones,
        trials: 20,
        seed: 1,
        sampling: SamplingWeight::Optimal,
        max_iters: 1000,
        tol: 1e-12,
    };
    let cells = phase_diagram(&cfg, Exec::Parallel).map_err(|e| e.to_string())?;
    if let Some(c) = cells.iter().find(|c| c.failed.is_some()) {
        return Err(format!("cell n={} failed: {:?}", c.n, c.failed));
    }
    let first = &cells[0];
    let last = cells.last().expect("four cells");
    ensure(
        last.mean_rel_error * 100.0 <= first.mean_rel_error && last.success_rate >= 0.9,
        format!(
            "err(15) = {:.3e}, err(500) = {:.3e}, success(500) = {:.2}",
            first.mean_rel_error, last.mean_rel_error, last.success_rate
        ),
    )
}

fn quasi_optimality() -> Outcome {
    let dims = vec![4usize, 4];
    let weight = WeightFunction::separable_optimal(&dims).map_err(|e| e.to_string())?;
    let domain = Domain::new(2).map_err(|e| e.to_string())?;
    let basis = TensorBasis::legendre(&dims);
    let class = ModelClass::Rank1Cone { dims: dims.clone() };
    let mut passed = 0;
    let mut applicable = 0;
    let mut worst: f64 = 0.0;
    let mut max_delta: f64 = 0.0;
    for inst in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + inst);
        let mut gauss = |k: usize| -> Vec<f64> { (0..k).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let core = CoeffTensor::rank1(vec![gauss(4), gauss(4)]).map_err(|e| e.to_string())?;
        let tail = CoeffTensor::dense(dims.clone(), gauss(16)).map_err(|e| e.to_string())?;
        let tail = tail.scaled(1e-3 / tail.norm());
        let u = core.add_scaled(1.0, &tail).map_err(|e| e.to_string())?;
        let u_m = samplecx::model::project(&class, &u).map_err(|e| e.to_string())?.point;
        let batch = draw_samples(&domain, &weight, 160, 900 + inst).map_err(|e| e.to_string())?;
        let targets: Vec<f64> = (0..batch.len())
            .map(|i| u.eval(&basis, batch.point(i)))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let opts = IhtOptions {
            seed: inst,
            ..IhtOptions::default()
        };
        let result = solve_iht_rank1(&dims, &batch, &targets, opts).map_err(|e| e.to_string())?;
        let diff_class = ModelClass::Shift {
            anchor: u_m,
            inner: Box::new(class.clone()),
        };
        let delta = rip_delta_mc(&diff_class, &batch, 2000, 77 + inst, Exec::Parallel)
            .map_err(|e| e.to_string())?
            .delta_hat;
        let report = quasi_opt_check(&u, &class, &batch, &weight, &result, delta).map_err(|e| e.to_string())?;
        if report.applicable {
            applicable += 1;
            passed += usize::from(report.pass);
            worst = worst.max(report.lhs / report.rhs);
            max_delta = max_delta.max(delta);
        }
    }
    ensure(
        applicable == 20 && passed == applicable,
        format!(
            "{passed}/{applicable} instances hold (20 required), max lhs/rhs = {worst:.3}, max delta = {max_delta:.3}"
        ),
    )
}

fn geometry_suite() -> Outcome {
    let circle = ManifoldChart::Circle { radius: 1.0 };
    let parabola = ManifoldChart::Parabola { curvature: 0.1 };
    let e = |x: samplecx::error::Error| x.to_string();
    let eq = check_tangent_projection(&circle, 2f64.sqrt(), 1.0, 1000, 1).map_err(e)?;
    let a_par = check_tangent_projection(&parabola, 1.0, 10.0, 1000, 2).map_err(e)?;
    let b_circ = check_manifold_projection(&circle, 0.5, 1.0, 1000, 3).map_err(e)?;
    let b_par = check_manifold_projection(&parabola, 0.5, 10.0, 1000, 4).map_err(e)?;
    let h_circ = check_hausdorff_rates(&circle, &[0.5, 0.4, 0.2, 0.1], 1.0, 2000, Exec::Parallel).map_err(e)?;
    let h_par = check_hausdorff_rates(&parabola, &[1.0, 0.5, 0.25], 10.0, 2000, Exec::Parallel).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v = CoeffTensor::from_matrix(&DMatrix::from_fn(4, 4, |i, j| a[i] * b[j]));
    let sigma = singular_values(&v.to_matrix())[0];
    let reach = reach_lowrank_ball(&v, 1, sigma).map_err(e)?;
    let pert = reach_perturbation_check(&v, 1, sigma, 1000, 9, Exec::Parallel).map_err(e)?;
    let hausdorff_ok = h_circ.iter().chain(&h_par).all(|r| r.pass);
    let ok = eq.pass
        && eq.max_bound_gap <= 1e-12
        && a_par.pass
        && b_circ.pass
        && b_par.pass
        && hausdorff_ok
        && reach.reach == sigma / 2.0
        && pert.pass;
    ensure(
        ok,
        format!(
            "circle equality gap {:.1e}; tangent projection parabola {}/{}; manifold projection circle {}/{}, parabola {}/{}; Hausdorff rates {}; perturbation {}/{}",
            eq.max_bound_gap,
            a_par.passed,
            a_par.samples,
            b_circ.passed,
            b_circ.samples,
            b_par.passed,
            b_par.samples,
            if hausdorff_ok { "pass" } else { "fail" },
            pert.passed,
            pert.samples
        ),
    )
}

fn local_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let a: Vec<f64> = (0..4).map(|_| StandardNormal.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..4).map(|_| StandardNormal.sample(&mut rng)).collect();
    let u = CoeffTensor::from_matrix(&DMatrix::from_fn(4, 4, |i, j| a[i] * b[j]));
    let sigma = singular_values(&u.to_matrix())[0];
    let reach = reach_lowrank_ball(&u, 1, sigma).map_err(|e| e.to_string())?.reach;
    let cfg = LocalBoundConfig {
        anchor: u,
        rank: 1,
        radii: vec![0.5 * sigma, 0.25 * sigma, 0.125 * sigma],
        reach,
        num_samples: 1000,
        seed: 3,
    };
    let grid = Grid::standard(2).map_err(|e| e.to_string())?;
    let r = klimit_check(&cfg, &grid, Exec::Parallel).map_err(|e| e.to_string())?;
    let gaps: Vec<String> = r.rows.iter().map(|row| format!("{:.3}", row.gap)).collect();
    let excess = r
        .rows
        .iter()
        .map(|row| row.max_excess)
        .fold(f64::NEG_INFINITY, f64::max);
    ensure(
        r.rows.iter().all(|row| row.bound_ok) && r.gaps_nonincreasing,
        format!(
            "{} grid points, max(estimate - bound) = {excess:.3e}, gaps [{}], limit check {}",
            r.grid_points,
            gaps.join(", "),
            r.limit_ok
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("legendre variation norms", legendre_norms),
        ("optimal weight identity", optimal_weight_identity),
        ("rank-1 cone variation witness", rank1_witness),
        ("spectral vs Monte Carlo delta", spectral_vs_mc),
        ("singleton failure-rate bound", hoeffding_shape),
        ("phase diagram trend", phase_trend),
        ("quasi-optimality", quasi_optimality),
        ("geometry suite", geometry_suite),
        ("local variation bounds", local_bounds),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {} {name}: {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {} {name}: {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
