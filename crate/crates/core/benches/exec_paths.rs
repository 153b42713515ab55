use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use samplecx::exec::Exec;
use samplecx::geometry::{hausdorff, PointCloud};
use samplecx::grid::Grid;
use samplecx::measure::WeightFunction;
use samplecx::model::ModelClass;
use samplecx::rip::{rip_probability, RipMethod};
use samplecx::solver::{phase_diagram, PhaseConfig, PhaseTarget, SamplingWeight};
use samplecx::variation::{variation_estimate, variation_exact};

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn eval_grid(c: &mut Criterion) {
    let k = variation_exact(&ModelClass::Rank1Cone { dims: vec![8, 8, 8] }).unwrap();
    let grid = Grid::uniform(3, 20_000, 1).unwrap();
    let mut group = c.benchmark_group("eval_many");
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(k.eval_many(&grid, exec).unwrap()))
        });
    }
    group.finish();
}

fn rip_trials(c: &mut Criterion) {
    let class = ModelClass::FullSpace { dims: vec![6, 6] };
    let w = WeightFunction::separable_optimal(&[6, 6]).unwrap();
    let mut group = c.benchmark_group("rip_probability");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(rip_probability(&class, &w, 400, 0.5, 64, 7, RipMethod::Spectral, exec).unwrap()))
        });
    }
    group.finish();
}

fn variation_mc(c: &mut Criterion) {
    let class = ModelClass::LowRankMatrix {
        rows: 10,
        cols: 10,
        rank: 2,
    };
    let mut group = c.benchmark_group("variation_estimate");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(variation_estimate(&class, 5000, 3, exec).unwrap()))
        });
    }
    group.finish();
}

fn hausdorff_clouds(c: &mut Criterion) {
    let pts = |seed| {
        let g = Grid::uniform(3, 4000, seed).unwrap();
        PointCloud::new(g.iter().map(|p| p.to_vec()).collect()).unwrap()
    };
    let (a, b2) = (pts(1), pts(2));
    let mut group = c.benchmark_group("hausdorff");
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(hausdorff(&a, &b2, exec).unwrap()))
        });
    }
    group.finish();
}

fn phase_cells(c: &mut Criterion) {
    let cfg = PhaseConfig {
        orders: vec![2],
        sample_counts: vec![60, 120],
        d: 6,
        target: PhaseTarget::Exp,
        trials: 8,
        seed: 0,
        sampling: SamplingWeight::Optimal,
        max_iters: 200,
        tol: 1e-10,
    };
    let mut group = c.benchmark_group("phase_diagram");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(phase_diagram(&cfg, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    eval_grid,
    rip_trials,
    variation_mc,
    hausdorff_clouds,
    phase_cells
);
criterion_main!(benches);
