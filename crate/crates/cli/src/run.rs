//! The experiments behind each subcommand.

use std::sync::Arc;

use samplecx::geometry::{
    check_hausdorff_rates, check_manifold_projection, check_tangent_projection, klimit_check, reach_perturbation_check,
    LocalBoundConfig, ManifoldChart,
};
use samplecx::measure::empirical_norm_coeffs;
use samplecx::model::project;
use samplecx::rip::{derive_seed, rip_delta, rip_probability, write_csv as write_rip_csv, RipMethod};
use samplecx::solver::{
    phase_diagram, quasi_opt_check, solve_iht_rank1, solve_linear, write_phase_csv, PhaseConfig, SolveResult,
};
use samplecx::variation::{variation_estimate, variation_exact, write_csv as write_variation_csv};
use samplecx::{draw_samples, Domain, Exec, Grid, ModelClass, TensorBasis, VariationFn, WeightFunction};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    GeometryCheck, GeometryParams, GridParams, OptimalWeightParams, PhaseParams, QuasiOptParams, RipParams,
    VariationMethod, VariationParams, WeightParams,
};
use crate::output::OutputDir;

/// Why a run did not complete cleanly.
#[derive(Debug)]
pub enum Failure {
    /// Invalid configuration or I/O failure.
    Config(anyhow::Error),
    /// A numerical procedure failed.
    Numerical(anyhow::Error),
}

impl From<samplecx::Error> for Failure {
    fn from(e: samplecx::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.into())
        } else {
            Failure::Config(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.into())
    }
}

/// Outputs were written, but some part of the computation failed and is
/// recorded in them.
pub type Warnings = Vec<String>;

pub type RunResult = Result<Warnings, Failure>;

fn build_grid(params: &GridParams, num_modes: usize, seed: u64) -> samplecx::Result<Grid> {
    match params {
        GridParams::Standard {} => Grid::standard(num_modes),
        GridParams::Tensor { points_per_mode } => Grid::tensor(&Grid::lobatto_1d(*points_per_mode), num_modes),
        GridParams::Uniform { n } => Grid::uniform(num_modes, *n, seed),
        GridParams::Points { points } => Grid::from_points(num_modes, points.concat()),
    }
}

fn build_weight(params: &WeightParams, class: &ModelClass) -> samplecx::Result<WeightFunction> {
    match params {
        WeightParams::Uniform {} => Ok(WeightFunction::Uniform),
        WeightParams::SeparableOptimal { dims } => WeightFunction::separable_optimal(dims),
        WeightParams::Optimal {} => {
            let k = variation_exact(class)?;
            WeightFunction::from_variation(Arc::new(k), &Domain::new(class.dims().len())?)
        }
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    f(&mut out)?;
    Ok(out)
}

fn variation_fn(params: &VariationParams, seed: u64, exec: Exec) -> samplecx::Result<VariationFn> {
    match params.method {
        VariationMethod::Exact {} => variation_exact(&params.class),
        VariationMethod::Estimate { num_samples } => variation_estimate(&params.class, num_samples, seed, exec),
    }
}

pub fn variation(params: &VariationParams, seed: u64, exec: Exec, out: &mut OutputDir) -> RunResult {
    params.class.validate()?;
    let k = variation_fn(params, derive_seed(seed, 0), exec)?;
    let grid = build_grid(&params.grid, params.class.dims().len(), derive_seed(seed, 1))?;
    let mut bytes = Vec::new();
    write_variation_csv(&k, &grid, exec, &mut bytes)?;
    out.put("variation.csv", bytes)?;
    Ok(Vec::new())
}

pub fn optimal_weight(params: &OptimalWeightParams, seed: u64, exec: Exec, out: &mut OutputDir) -> RunResult {
    params.class.validate()?;
    let m = params.class.dims().len();
    let k = Arc::new(variation_exact(&params.class)?);
    let domain = Domain::new(m)?;
    let weight = WeightFunction::from_variation(k.clone(), &domain)?;
    let grid = build_grid(&params.grid, m, derive_seed(seed, 1))?;
    let values = k.eval_many(&grid, exec)?;
    let mut text = header(m, &["K_value", "weight"]);
    for (y, v) in grid.iter().zip(&values) {
        text.push_str(&row(y, &[*v, weight.value(y)?]));
    }
    out.put("optimal_weight.csv", text.into_bytes())?;
    if params.num_samples > 0 {
        let batch = draw_samples(&domain, &weight, params.num_samples, derive_seed(seed, 2))?;
        let mut text = header(m, &["weight"]);
        for i in 0..batch.len() {
            text.push_str(&row(batch.point(i), &[batch.weights[i]]));
        }
        out.put("samples.csv", text.into_bytes())?;
    }
    Ok(Vec::new())
}

fn header(m: usize, extra: &[&str]) -> String {
    let mut cols: Vec<String> = (1..=m).map(|i| format!("y_{i}")).collect();
    cols.extend(extra.iter().map(|s| s.to_string()));
    cols.join(",") + "\n"
}

fn row(y: &[f64], extra: &[f64]) -> String {
    let cols: Vec<String> = y.iter().chain(extra).map(|v| v.to_string()).collect();
    cols.join(",") + "\n"
}

pub fn rip_prob(params: &RipParams, seed: u64, exec: Exec, out: &mut OutputDir) -> RunResult {
    params.class.validate()?;
    let weight = build_weight(&params.weight, &params.class)?;
    let mut rows = Vec::with_capacity(params.sample_counts.len());
    for (i, &n) in params.sample_counts.iter().enumerate() {
        let s = derive_seed(seed, i as u64);
        rows.push(rip_probability(
            &params.class,
            &weight,
            n,
            params.delta,
            params.trials,
            s,
            params.method.into(),
            exec,
        )?);
    }
    out.put("rip.csv", csv_bytes(|b| write_rip_csv(&rows, b))?)?;
    Ok(Vec::new())
}

pub fn phase(params: &PhaseParams, seed: u64, exec: Exec, out: &mut OutputDir) -> RunResult {
    let cfg = PhaseConfig {
        orders: params.orders.clone(),
        sample_counts: params.sample_counts.clone(),
        d: params.d,
        target: params.target,
        trials: params.trials,
        seed,
        sampling: params.sampling,
        max_iters: params.max_iters,
        tol: params.tol,
    };
    let cells = phase_diagram(&cfg, exec)?;
    out.put("phase.csv", csv_bytes(|b| write_phase_csv(&cells, b))?)?;
    Ok(cells
        .iter()
        .filter_map(|c| c.failed.as_ref().map(|e| format!("cell M={} n={}: {e}", c.order, c.n)))
        .collect())
}

fn chart_reach(chart: &ManifoldChart, reach: Option<f64>) -> anyhow::Result<f64> {
    reach
        .or_else(|| chart.reach())
        .ok_or_else(|| anyhow::anyhow!("the chart has no closed-form reach; set \"reach\""))
}

#[derive(Serialize)]
struct GeometryRecord {
    check: &'static str,
    pass: bool,
    result: Value,
}

fn record<T: Serialize>(check: &'static str, pass: bool, result: &T) -> anyhow::Result<GeometryRecord> {
    Ok(GeometryRecord {
        check,
        pass,
        result: serde_json::to_value(result)?,
    })
}

pub fn geometry(params: &GeometryParams, seed: u64, exec: Exec, out: &mut OutputDir) -> RunResult {
    let mut records = Vec::with_capacity(params.checks.len());
    for (i, check) in params.checks.iter().enumerate() {
        let s = derive_seed(seed, i as u64);
        let rec = match check {
            GeometryCheck::TangentProjection {
                chart,
                r,
                reach,
                num_samples,
            } => {
                let c = check_tangent_projection(chart, *r, chart_reach(chart, *reach)?, *num_samples, s)?;
                record("tangent_projection", c.pass, &c)?
            }
            GeometryCheck::ManifoldProjection {
                chart,
                r,
                reach,
                num_samples,
            } => {
                let c = check_manifold_projection(chart, *r, chart_reach(chart, *reach)?, *num_samples, s)?;
                record("manifold_projection", c.pass, &c)?
            }
            GeometryCheck::HausdorffRates {
                chart,
                radii,
                reach,
                cloud_size,
            } => {
                let rows = check_hausdorff_rates(chart, radii, chart_reach(chart, *reach)?, *cloud_size, exec)?;
                record("hausdorff_rates", rows.iter().all(|r| r.pass), &rows)?
            }
            GeometryCheck::ReachPerturbation {
                anchor,
                rank,
                r,
                num_samples,
            } => {
                let c = reach_perturbation_check(anchor, *rank, *r, *num_samples, s, exec)?;
                record("reach_perturbation", c.pass, &c)?
            }
            GeometryCheck::LocalBound {
                anchor,
                rank,
                radii,
                reach,
                num_samples,
                grid,
            } => {
                let cfg = LocalBoundConfig {
                    anchor: anchor.clone(),
                    rank: *rank,
                    radii: radii.clone(),
                    reach: *reach,
                    num_samples: *num_samples,
                    seed: s,
                };
                let grid = build_grid(grid, anchor.num_modes(), derive_seed(s, 1))?;
                let r = klimit_check(&cfg, &grid, exec)?;
                record("local_bound", r.pass, &r)?
            }
        };
        records.push(rec);
    }
    let pass = records.iter().all(|r| r.pass);
    out.put_json("geometry.json", &json!({ "pass": pass, "checks": records }))?;
    Ok(Vec::new())
}

#[derive(Serialize)]
struct QuasiOptOutput {
    lhs: f64,
    rhs: f64,
    factor: f64,
    delta_hat: f64,
    pass: bool,
    applicable: bool,
    tail_sup: f64,
    tail_norm: f64,
    residual_ok: bool,
    solver: &'static str,
    iterations: usize,
    converged: bool,
    stagnated: bool,
}

pub fn quasi_opt(params: &QuasiOptParams, seed: u64, exec: Exec, out: &mut OutputDir) -> RunResult {
    params.class.validate()?;
    let dims = params.class.dims();
    if dims != params.u.dims() {
        return Err(Failure::Config(anyhow::anyhow!(
            "target dims {:?} do not match class dims {dims:?}",
            params.u.dims()
        )));
    }
    let weight = build_weight(&params.weight, &params.class)?;
    let batch = draw_samples(&Domain::new(dims.len())?, &weight, params.n, derive_seed(seed, 0))?;
    let basis = TensorBasis::legendre(&dims);
    let targets: Vec<f64> = (0..batch.len())
        .map(|i| params.u.eval(&basis, batch.point(i)))
        .collect::<samplecx::Result<_>>()?;
    let (solver, result): (&str, SolveResult) = match &params.class {
        c if c.is_linear() => ("least_squares", solve_linear(c, &batch, &targets)?),
        ModelClass::Rank1Cone { dims } => {
            let opts = params.iht.unwrap_or_default();
            ("hard_thresholding", solve_iht_rank1(dims, &batch, &targets, opts)?)
        }
        _ => {
            return Err(Failure::Config(anyhow::anyhow!(
                "quasi-opt supports linear classes and rank1_cone"
            )))
        }
    };
    let delta_class = if params.class.is_linear() {
        params.class.clone()
    } else {
        ModelClass::Shift {
            anchor: project(&params.class, &params.u)?.point,
            inner: Box::new(params.class.clone()),
        }
    };
    let method = RipMethod::from(params.delta);
    if method == RipMethod::Spectral && !delta_class.is_linear() {
        return Err(Failure::Config(anyhow::anyhow!(
            "spectral delta needs a linear class; use monte_carlo"
        )));
    }
    let delta_hat = rip_delta(&delta_class, &batch, method, derive_seed(seed, 2), exec)?.delta_hat;
    let q = quasi_opt_check(&params.u, &params.class, &batch, &weight, &result, delta_hat)?;
    let report = QuasiOptOutput {
        lhs: q.lhs,
        rhs: q.rhs,
        factor: q.factor,
        delta_hat: q.delta_hat,
        pass: q.pass,
        applicable: q.applicable,
        tail_sup: q.tail_sup,
        tail_norm: q.tail_norm,
        residual_ok: q.residual_ok,
        solver,
        iterations: result.iterations,
        converged: result.converged,
        stagnated: result.stagnated,
    };
    out.put_json("quasiopt.json", &report)?;
    let mut warnings = Vec::new();
    if result.stagnated {
        warnings.push(format!(
            "solver stagnated after {} iterations (residual {:e}, empirical norm of u {:e})",
            result.iterations,
            result.residual,
            empirical_norm_coeffs(&params.u, &batch)?
        ));
    }
    Ok(warnings)
}
