//! Empirical best approximation: weighted least squares on linear spaces,
//! iterative hard thresholding on rank-1 tensors, the quasi-optimality check
//! and the recovery phase diagram.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{expand_univariate, BasisTable, CoeffTensor, TensorBasis};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::Grid;
use crate::measure::{draw_samples, Domain, SampleBatch, WeightFunction};
use crate::model::rank1::{best_rank1, refine_rank1, DenseView};
use crate::model::{lowrank, project, ModelClass};
use crate::rip::{derive_seed, design_matrix};

/// Singular values below this fraction of the largest are dropped.
pub const PINV_CUTOFF: f64 = 1e-10;
pub const MAX_HALVINGS: usize = 30;
/// Consecutive failed line searches before giving up.
pub const STAGNATION_LIMIT: usize = 5;
/// Largest dense coefficient tensor (2^24 entries).
pub const MAX_DENSE_ENTRIES: usize = 1 << 24;
pub const SUCCESS_THRESHOLD: f64 = 1e-4;
/// Slack, relative to ‖u‖_y, when comparing a computed minimizer's residual
/// with that of the best approximation.
pub const RESIDUAL_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveResult {
    pub estimate: CoeffTensor,
    pub iterations: usize,
    /// Final ‖u − v‖_y.
    pub residual: f64,
    pub converged: bool,
    pub stagnated: bool,
    pub rank_deficient: bool,
    /// Empirical residuals ‖u − v‖_y of the accepted iterates.
    pub history: Vec<f64>,
}

fn check_targets(batch: &SampleBatch, targets: &[f64]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if targets.len() != batch.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} target values", batch.len()),
            got: format!("{}", targets.len()),
        });
    }
    Ok(())
}

/// Exact minimizer of ‖u − v‖_y over a linear class, by an SVD
/// pseudo-inverse of the weighted design matrix (minimum-norm when the
/// system is rank deficient).
pub fn solve_linear(class: &ModelClass, batch: &SampleBatch, targets: &[f64]) -> Result<SolveResult> {
    class.validate()?;
    check_targets(batch, targets)?;
    let frame = class
        .linear_frame()
        .ok_or_else(|| Error::Precondition("least squares needs a linear class".into()))?;
    let phi = design_matrix(&frame, batch)?;
    let n = batch.len() as f64;
    let rhs = DVector::from_iterator(
        batch.len(),
        targets.iter().zip(&batch.weights).map(|(u, w)| (w / n).sqrt() * u),
    );
    let svd = phi.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = PINV_CUTOFF * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let coef = if smax > 0.0 {
        svd.solve(&rhs, cutoff)
            .map_err(|e| Error::Construction(e.to_string()))?
    } else {
        DVector::zeros(frame.len())
    };
    let residual = (&phi * &coef - &rhs).norm();
    let mut estimate = CoeffTensor::zeros(frame.dims());
    for (e, c) in frame.elements().iter().zip(coef.iter()) {
        estimate = estimate.add_scaled(*c, e)?;
    }
    Ok(SolveResult {
        estimate,
        iterations: 1,
        residual,
        converged: true,
        stagnated: false,
        rank_deficient: rank < frame.len(),
        history: vec![residual],
    })
}

/// Options of [`solve_iht_rank1`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IhtOptions {
    pub max_iters: usize,
    /// Stop when the relative decrease of the squared residual falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for IhtOptions {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tol: 1e-12,
            seed: 0,
        }
    }
}

struct Rank1Problem<'a> {
    dims: Vec<usize>,
    table: BasisTable,
    batch: &'a SampleBatch,
    targets: &'a [f64],
}

impl Rank1Problem<'_> {
    fn values(&self, factors: &[Vec<f64>]) -> Vec<f64> {
        (0..self.batch.len())
            .map(|i| {
                let view = self.table.point(i);
                factors
                    .iter()
                    .enumerate()
                    .map(|(m, f)| crate::basis::dot(f, view.mode(m)))
                    .product()
            })
            .collect()
    }

    /// (1/n) Σ w (u − v)² and the residuals u − v.
    fn residual_sq(&self, factors: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let r: Vec<f64> = self
            .targets
            .iter()
            .zip(self.values(factors))
            .map(|(u, v)| u - v)
            .collect();
        let n = self.batch.len() as f64;
        let s = r.iter().zip(&self.batch.weights).map(|(r, w)| w * r * r).sum::<f64>() / n;
        (s, r)
    }

    /// Dense negative gradient (2/n) Σ w r ⊗_m φ_m.
    fn gradient(&self, r: &[f64]) -> Vec<f64> {
        let total: usize = self.dims.iter().product();
        let mut g = vec![0.0; total];
        let n = self.batch.len() as f64;
        let mut outer = Vec::with_capacity(total);
        for (i, ri) in r.iter().enumerate() {
            let c = 2.0 / n * self.batch.weights[i] * ri;
            if c == 0.0 {
                continue;
            }
            let view = self.table.point(i);
            outer.clear();
            outer.push(c);
            for m in 0..self.dims.len() {
                let phi = view.mode(m);
                let prev = std::mem::take(&mut outer);
                outer.extend(prev.iter().flat_map(|&a| phi.iter().map(move |&b| a * b)));
            }
            for (x, y) in g.iter_mut().zip(&outer) {
                *x += y;
            }
        }
        g
    }

    /// Best rank-1 approximation of a dense tensor, as factors.
    fn truncate(&self, data: &[f64], warm: &[Vec<f64>], thorough: bool, seed: u64) -> Vec<Vec<f64>> {
        if self.dims.len() == 2 {
            let s = lowrank::svd(&DMatrix::from_row_slice(self.dims[0], self.dims[1], data));
            return vec![
                s.u.column(0).iter().map(|x| x * s.sigma[0]).collect(),
                s.v.column(0).iter().copied().collect(),
            ];
        }
        if self.dims.len() == 1 {
            return vec![data.to_vec()];
        }
        let view = DenseView { dims: &self.dims, data };
        let fit = if thorough {
            best_rank1(&view, Some(warm), seed)
        } else {
            refine_rank1(&view, warm, seed)
        };
        fit.to_tensor().into_factors()
    }
}

impl CoeffTensor {
    fn into_factors(self) -> Vec<Vec<f64>> {
        match self {
            CoeffTensor::Rank1 { factors } => factors,
            CoeffTensor::Dense { data, .. } => vec![data],
        }
    }
}

/// Iterative hard thresholding over rank-1 coefficient tensors:
/// C ← T(C + αG) with G the negative gradient of ‖u − C‖²_y, α from
/// backtracking (1, ½, …, at most 30 halvings) until the residual decreases, and
/// T the best rank-1 approximation. The first step starts at C = 0.
pub fn solve_iht_rank1(dims: &[usize], batch: &SampleBatch, targets: &[f64], opts: IhtOptions) -> Result<SolveResult> {
    check_targets(batch, targets)?;
    if dims.is_empty() || dims.contains(&0) || dims.len() != batch.num_modes {
        return Err(Error::DimensionMismatch {
            expected: format!("{}-mode dims", batch.num_modes),
            got: format!("{dims:?}"),
        });
    }
    let total = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
    match total {
        Some(t) if t <= MAX_DENSE_ENTRIES => {}
        _ => {
            return Err(Error::TooLarge {
                entries: total.unwrap_or(usize::MAX),
                limit: MAX_DENSE_ENTRIES,
            })
        }
    }
    let problem = Rank1Problem {
        dims: dims.to_vec(),
        table: TensorBasis::legendre(dims).table(&batch.points)?,
        batch,
        targets,
    };
    let zero: Vec<Vec<f64>> = dims.iter().map(|&d| vec![0.0; d]).collect();
    let (mut res, mut r) = problem.residual_sq(&zero);
    let scale = res;
    let mut factors = zero;
    let mut history = vec![res.sqrt()];
    let done = |factors: Vec<Vec<f64>>, iterations, res: f64, converged, stagnated, history| SolveResult {
        estimate: CoeffTensor::Rank1 { factors },
        iterations,
        residual: res.sqrt(),
        converged,
        stagnated,
        rank_deficient: false,
        history,
    };
    if scale == 0.0 {
        return Ok(done(factors, 1, 0.0, true, false, history));
    }
    let mut failures = 0;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let g = problem.gradient(&r);
        let current = CoeffTensor::Rank1 {
            factors: factors.clone(),
        }
        .to_dense_data();
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let step: Vec<f64> = current.iter().zip(&g).map(|(c, g)| c + alpha * g).collect();
            let seed = derive_seed(opts.seed, iterations as u64 * 64 + failures as u64);
            let cand = problem.truncate(&step, &factors, failures > 0, seed);
            let (cand_res, cand_r) = problem.residual_sq(&cand);
            if cand_res < res {
                accepted = Some((cand, cand_res, cand_r));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, cand_res, cand_r)) = accepted else {
            failures += 1;
            if failures >= STAGNATION_LIMIT {
                let converged = res <= opts.tol * scale;
                return Ok(done(factors, iterations, res, converged, !converged, history));
            }
            continue;
        };
        failures = 0;
        let decrease = (res - cand_res) / res;
        factors = cand;
        res = cand_res;
        r = cand_r;
        history.push(res.sqrt());
        if res <= opts.tol * opts.tol * scale || decrease < opts.tol {
            return Ok(done(factors, iterations, res, true, false, history));
        }
    }
    Ok(done(factors, iterations, res, false, false, history))
}

/// 1 + 2/√(1 − δ).
pub fn quasi_opt_factor(delta: f64) -> f64 {
    1.0 + 2.0 / (1.0 - delta).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuasiOptReport {
    /// ‖u − u_{M,y}‖.
    pub lhs: f64,
    /// factor · ‖u − u_M‖_{w,∞} (grid value).
    pub rhs: f64,
    pub factor: f64,
    pub delta_hat: f64,
    /// ‖u − u_M‖_{w,∞} on the standard grid.
    pub tail_sup: f64,
    /// ‖u − u_M‖.
    pub tail_norm: f64,
    /// The computed minimizer has empirical residual at most that of u_M.
    pub residual_ok: bool,
    pub applicable: bool,
    pub pass: bool,
}

/// Evaluates both sides of ‖u − u_{M,y}‖ ≤ (1 + 2/√(1−δ))·‖u − u_M‖_{w,∞}.
/// Not applicable when δ̂ ≥ 1.
pub fn quasi_opt_check(
    u: &CoeffTensor,
    class: &ModelClass,
    batch: &SampleBatch,
    weight: &WeightFunction,
    result: &SolveResult,
    delta_hat: f64,
) -> Result<QuasiOptReport> {
    let best = project(class, u)?.point;
    let tail = u.sub(&best)?;
    let grid = Grid::standard(u.num_modes())?;
    let basis = TensorBasis::legendre(&u.dims());
    let table = basis.table(grid.as_flat())?;
    let mut tail_sup: f64 = 0.0;
    let mut scratch = Vec::new();
    for (i, y) in grid.iter().enumerate() {
        let v = tail.eval_view(table.point(i), &mut scratch);
        tail_sup = tail_sup.max(weight.value(y)?.sqrt() * v.abs());
    }
    let lhs = u.distance(&result.estimate)?;
    let resid = |c: &CoeffTensor| -> Result<f64> {
        let d = u.sub(c)?;
        crate::measure::empirical_norm_coeffs(&d, batch)
    };
    let scale = crate::measure::empirical_norm_coeffs(u, batch)?;
    let residual_ok = resid(&result.estimate)? <= resid(&best)? + RESIDUAL_SLACK * scale;
    let applicable = delta_hat < 1.0;
    let factor = if applicable {
        quasi_opt_factor(delta_hat)
    } else {
        f64::INFINITY
    };
    let rhs = factor * tail_sup;
    Ok(QuasiOptReport {
        lhs,
        rhs,
        factor,
        delta_hat,
        tail_sup,
        tail_norm: tail.norm(),
        residual_ok,
        applicable,
        pass: applicable && lhs <= rhs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseTarget {
    /// C_{k₁…k_M} = 1.
    Ones,
    /// u(y) = exp(y₁ + ⋯ + y_M); recovered against its per-mode expansion.
    Exp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingWeight {
    Uniform,
    /// Product of per-mode optimal Legendre densities.
    Optimal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub orders: Vec<usize>,
    pub sample_counts: Vec<usize>,
    pub d: usize,
    pub target: PhaseTarget,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_sampling")]
    pub sampling: SamplingWeight,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_sampling() -> SamplingWeight {
    SamplingWeight::Optimal
}

fn default_max_iters() -> usize {
    IhtOptions::default().max_iters
}

fn default_tol() -> f64 {
    IhtOptions::default().tol
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseCell {
    #[serde(rename = "M")]
    pub order: usize,
    pub n: usize,
    pub trials: usize,
    pub mean_rel_error: f64,
    pub success_rate: f64,
    pub seed: u64,
    /// ‖u − C*‖ of the target's discarded tail.
    pub tail_norm: f64,
    pub failed: Option<String>,
}

type Evaluator = Box<dyn Fn(&[f64]) -> f64 + Sync>;

/// The target's rank-1 coefficients, a pointwise evaluator of u and the
/// norm of the discarded tail.
fn phase_target(target: PhaseTarget, order: usize, d: usize) -> Result<(CoeffTensor, Evaluator, f64)> {
    match target {
        PhaseTarget::Ones => {
            let c = CoeffTensor::rank1(vec![vec![1.0; d]; order])?;
            let basis = TensorBasis::legendre(&vec![d; order]);
            let c2 = c.clone();
            Ok((c, Box::new(move |y| c2.eval(&basis, y).expect("validated point")), 0.0))
        }
        PhaseTarget::Exp => {
            let f = expand_univariate(f64::exp, d, crate::quadrature::DEFAULT_NODES)?;
            let c = CoeffTensor::rank1(vec![f; order])?;
            // ‖exp‖² = ∫e^{2y}dρ = sinh(2)/2 per mode
            let norm_sq = (2f64.sinh() / 2.0).powi(order as i32);
            let tail = (norm_sq - c.norm_sq()).max(0.0).sqrt();
            Ok((c, Box::new(|y: &[f64]| y.iter().sum::<f64>().exp()), tail))
        }
    }
}

fn phase_cell(cfg: &PhaseConfig, order: usize, n: usize) -> Result<PhaseCell> {
    let dims = vec![cfg.d; order];
    let entries = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .unwrap_or(usize::MAX);
    if entries > MAX_DENSE_ENTRIES {
        return Err(Error::TooLarge {
            entries,
            limit: MAX_DENSE_ENTRIES,
        });
    }
    let (truth, u, tail_norm) = phase_target(cfg.target, order, cfg.d)?;
    let weight = match cfg.sampling {
        SamplingWeight::Uniform => WeightFunction::Uniform,
        SamplingWeight::Optimal => WeightFunction::separable_optimal(&dims)?,
    };
    let domain = Domain::new(order)?;
    let norm = truth.norm();
    let mut errors = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let seed = cfg.seed.wrapping_add(t as u64);
        let batch = draw_samples(&domain, &weight, n, seed)?;
        let targets: Vec<f64> = (0..batch.len()).map(|i| u(batch.point(i))).collect();
        let opts = IhtOptions {
            max_iters: cfg.max_iters,
            tol: cfg.tol,
            seed,
        };
        let res = solve_iht_rank1(&dims, &batch, &targets, opts)?;
        errors.push(res.estimate.distance(&truth)? / norm);
    }
    let trials = errors.len();
    Ok(PhaseCell {
        order,
        n,
        trials,
        mean_rel_error: errors.iter().sum::<f64>() / trials as f64,
        success_rate: errors.iter().filter(|&&e| e < SUCCESS_THRESHOLD).count() as f64 / trials as f64,
        seed: cfg.seed,
        tail_norm,
        failed: None,
    })
}

/// One cell per (M, n), sorted by (M, n). A failing cell is reported with
/// its error message instead of aborting the sweep.
pub fn phase_diagram(cfg: &PhaseConfig, exec: Exec) -> Result<Vec<PhaseCell>> {
    if cfg.orders.is_empty() || cfg.sample_counts.is_empty() || cfg.trials == 0 || cfg.d == 0 {
        return Err(Error::InvalidArgument(
            "orders, sample counts, trials and d must be nonempty/positive".into(),
        ));
    }
    let mut cells: Vec<(usize, usize)> = cfg
        .orders
        .iter()
        .flat_map(|&m| cfg.sample_counts.iter().map(move |&n| (m, n)))
        .collect();
    cells.sort_unstable();
    cells.dedup();
    Ok(exec.map(cells.len(), |i| {
        let (order, n) = cells[i];
        phase_cell(cfg, order, n).unwrap_or_else(|e| PhaseCell {
            order,
            n,
            trials: cfg.trials,
            mean_rel_error: f64::NAN,
            success_rate: f64::NAN,
            seed: cfg.seed,
            tail_norm: f64::NAN,
            failed: Some(e.to_string()),
        })
    }))
}

/// CSV with columns M,n,trials,mean_rel_error,success_rate,seed.
pub fn write_phase_csv<W: Write>(cells: &[PhaseCell], mut out: W) -> std::io::Result<()> {
    writeln!(out, "M,n,trials,mean_rel_error,success_rate,seed")?;
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            c.order, c.n, c.trials, c.mean_rel_error, c.success_rate, c.seed
        )?;
    }
    Ok(())
}
