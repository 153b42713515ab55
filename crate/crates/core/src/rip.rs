//! Restricted isometry: measured deviations δ̂ on a sample and Monte Carlo
//! estimates of the probability that RIP_A(δ) holds.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::basis::{CoeffTensor, TensorBasis};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::Grid;
use crate::measure::{draw_samples, Domain, SampleBatch, WeightFunction};
use crate::model::{sample_unit_element, LinearFrame, ModelClass};
use crate::variation::{variation_estimate, variation_exact, variation_norms, Certificate};

/// Largest linear class handled by the spectral engine.
pub const MAX_SPECTRAL_DIM: usize = 1000;
/// Unit elements used to estimate ‖𝕂‖_{w,∞} when no closed form exists.
pub const NORM_ESTIMATE_SAMPLES: usize = 2000;
const WILSON_Z: f64 = 1.959_963_984_540_054;

/// SplitMix64 finalizer; decorrelates seeds derived from one base seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RipMethod {
    /// Exact over a linear space, from the empirical Gram matrix.
    Spectral,
    /// Maximum over `num_test` random unit elements; a lower bound.
    MonteCarlo { num_test: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RipReport {
    pub delta_hat: f64,
    /// Smallest and largest ‖a‖²_y/‖a‖² found.
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub method: RipMethod,
}

impl RipReport {
    fn from_ratios(min_ratio: f64, max_ratio: f64, method: RipMethod) -> Self {
        Self {
            delta_hat: (1.0 - min_ratio).max(max_ratio - 1.0).max(0.0),
            min_ratio,
            max_ratio,
            method,
        }
    }

    /// Whether the measured deviation is within δ.
    pub fn holds(&self, delta: f64) -> bool {
        self.delta_hat <= delta
    }
}

fn check_batch(dims: &[usize], batch: &SampleBatch) -> Result<()> {
    if dims.len() != batch.num_modes {
        return Err(Error::DimensionMismatch {
            expected: format!("{}-mode batch", dims.len()),
            got: format!("{}", batch.num_modes),
        });
    }
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    Ok(())
}

/// Rows √(w_i/n)·(B_1(yⁱ), …, B_D(yⁱ)) of the weighted design matrix of a
/// linear frame.
pub fn design_matrix(frame: &LinearFrame, batch: &SampleBatch) -> Result<DMatrix<f64>> {
    let dims = frame.dims();
    check_batch(dims, batch)?;
    let table = TensorBasis::legendre(dims).table(&batch.points)?;
    let n = batch.len();
    let mut phi = DMatrix::zeros(n, frame.len());
    let mut scratch = Vec::new();
    for i in 0..n {
        let s = (batch.weights[i] / n as f64).sqrt();
        let view = table.point(i);
        match frame {
            LinearFrame::Indices { indices, .. } => {
                for (j, idx) in indices.iter().enumerate() {
                    phi[(i, j)] = s * idx.iter().enumerate().map(|(m, &k)| view.mode(m)[k]).product::<f64>();
                }
            }
            LinearFrame::Elements { elements, .. } => {
                for (j, e) in elements.iter().enumerate() {
                    phi[(i, j)] = s * e.eval_view(view, &mut scratch);
                }
            }
        }
    }
    Ok(phi)
}

/// δ̂ = ‖G − I‖₂ for the empirical Gram matrix G over an orthonormal basis of
/// a linear class.
pub fn rip_delta_linear(class: &ModelClass, batch: &SampleBatch) -> Result<RipReport> {
    class.validate()?;
    let frame = class
        .linear_frame()
        .ok_or_else(|| Error::Precondition("spectral RIP needs a linear class".into()))?;
    if frame.len() > MAX_SPECTRAL_DIM {
        return Err(Error::TooLarge {
            entries: frame.len(),
            limit: MAX_SPECTRAL_DIM,
        });
    }
    let phi = design_matrix(&frame, batch)?;
    let gram = phi.transpose() * &phi;
    let eig = SymmetricEigen::new(gram);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RipReport::from_ratios(min, max, RipMethod::Spectral))
}

/// ‖a‖²_y for a unit element (its ambient norm is 1).
fn empirical_sq(a: &CoeffTensor, batch: &SampleBatch, table: &crate::basis::BasisTable, scratch: &mut Vec<f64>) -> f64 {
    let n = batch.len() as f64;
    (0..batch.len())
        .map(|i| batch.weights[i] * a.eval_view(table.point(i), scratch).powi(2))
        .sum::<f64>()
        / n
}

/// δ̂ as the maximum of |‖a‖²_y − 1| over `num_test` random unit elements
/// (seeds `seed, seed + 1, …`); a lower bound of the true deviation.
pub fn rip_delta_mc(
    class: &ModelClass,
    batch: &SampleBatch,
    num_test: usize,
    seed: u64,
    exec: Exec,
) -> Result<RipReport> {
    class.validate()?;
    if num_test == 0 {
        return Err(Error::InvalidArgument("num_test must be positive".into()));
    }
    let dims = class.dims();
    check_batch(&dims, batch)?;
    let table = TensorBasis::legendre(&dims).table(&batch.points)?;
    let ratios = exec.try_map(num_test, |i| -> Result<f64> {
        let a = sample_unit_element(class, seed.wrapping_add(i as u64))?;
        Ok(empirical_sq(&a, batch, &table, &mut Vec::new()))
    })?;
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RipReport::from_ratios(min, max, RipMethod::MonteCarlo { num_test }))
}

/// Either engine, dispatched on the method.
pub fn rip_delta(
    class: &ModelClass,
    batch: &SampleBatch,
    method: RipMethod,
    seed: u64,
    exec: Exec,
) -> Result<RipReport> {
    match method {
        RipMethod::Spectral => rip_delta_linear(class, batch),
        RipMethod::MonteCarlo { num_test } => rip_delta_mc(class, batch, num_test, seed, exec),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RipProbEstimate {
    pub n: usize,
    pub delta: f64,
    pub trials: usize,
    pub failures: usize,
    pub rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    /// (n/2)(δ/‖𝕂_A‖_{w,∞})².
    pub exponent: f64,
    /// Grid value of ‖𝕂_A‖_{w,∞} used for the exponent.
    pub variation_sup: f64,
    pub variation_certificate: Certificate,
    pub method: RipMethod,
}

impl RipProbEstimate {
    /// Binomial standard error of the failure rate.
    pub fn standard_error(&self) -> f64 {
        (self.rate * (1.0 - self.rate) / self.trials as f64).sqrt()
    }
}

/// Wilson score interval at 95% for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Grid value of ‖𝕂_A‖_{w,∞}, from the closed form when available and from a
/// Monte Carlo lower bound otherwise.
pub fn variation_sup(class: &ModelClass, weight: &WeightFunction, seed: u64, exec: Exec) -> Result<(f64, Certificate)> {
    let k = match variation_exact(class) {
        Ok(k) => k,
        Err(Error::Unsupported(_)) => variation_estimate(class, NORM_ESTIMATE_SAMPLES, seed, exec)?,
        Err(e) => return Err(e),
    };
    let grid = Grid::standard(class.dims().len())?;
    let values = k.eval_many(&grid, exec)?;
    let mut sup: f64 = 0.0;
    for (y, v) in grid.iter().zip(values) {
        sup = sup.max(weight.value(y)? * v);
    }
    Ok((sup, k.certificate()))
}

/// Runs `trials` independent batches (trial t uses seed + t) and counts the
/// ones where δ̂ > δ.
#[allow(clippy::too_many_arguments)]
pub fn rip_probability(
    class: &ModelClass,
    weight: &WeightFunction,
    n: usize,
    delta: f64,
    trials: usize,
    seed: u64,
    method: RipMethod,
    exec: Exec,
) -> Result<RipProbEstimate> {
    class.validate()?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta {delta} must lie in (0, 1)")));
    }
    let domain = Domain::new(class.dims().len())?;
    let failed = exec.try_map(trials, |t| -> Result<bool> {
        let trial_seed = seed.wrapping_add(t as u64);
        let batch = draw_samples(&domain, weight, n, trial_seed)?;
        let report = rip_delta(class, &batch, method, derive_seed(trial_seed, 1), Exec::Sequential)?;
        Ok(!report.holds(delta))
    })?;
    let failures = failed.iter().filter(|&&f| f).count();
    let (variation_sup, variation_certificate) = variation_sup(class, weight, derive_seed(seed, 2), exec)?;
    let (wilson_lo, wilson_hi) = wilson_interval(failures, trials);
    Ok(RipProbEstimate {
        n,
        delta,
        trials,
        failures,
        rate: failures as f64 / trials as f64,
        wilson_lo,
        wilson_hi,
        exponent: n as f64 / 2.0 * (delta / variation_sup).powi(2),
        variation_sup,
        variation_certificate,
        method,
    })
}

/// Report of the norm quantities entering the probability bound.
pub fn bound_norms(
    class: &ModelClass,
    weight: &WeightFunction,
    exec: Exec,
) -> Result<crate::variation::VariationNormReport> {
    let k = variation_exact(class)?;
    variation_norms(&k, weight, &Grid::standard(class.dims().len())?, exec)
}

/// CSV with columns n,delta,trials,failures,rate,wilson_lo,wilson_hi,exponent.
pub fn write_csv<W: Write>(rows: &[RipProbEstimate], mut out: W) -> std::io::Result<()> {
    writeln!(out, "n,delta,trials,failures,rate,wilson_lo,wilson_hi,exponent")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n, r.delta, r.trials, r.failures, r.rate, r.wilson_lo, r.wilson_hi, r.exponent
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(d: usize, idx: &[usize]) -> ModelClass {
        ModelClass::LinearSpan {
            dims: vec![d],
            indices: idx.iter().map(|&k| vec![k]).collect(),
        }
    }

    #[test]
    fn constant_span_is_isometric() {
        let batch = draw_samples(&Domain::new(1).unwrap(), &WeightFunction::Uniform, 17, 3).unwrap();
        let r = rip_delta_linear(&span(1, &[0]), &batch).unwrap();
        assert!(r.delta_hat < 1e-14);
    }

    #[test]
    fn single_point_ratio() {
        let batch = SampleBatch::from_parts(1, vec![1.0], vec![1.0], 0).unwrap();
        let r = rip_delta_linear(&span(2, &[1]), &batch).unwrap();
        assert!((r.max_ratio - 3.0).abs() < 1e-12);
        assert!((r.delta_hat - 2.0).abs() < 1e-12);
        let mc = rip_delta_mc(&span(2, &[1]), &batch, 4, 0, Exec::Sequential).unwrap();
        assert!((mc.delta_hat - r.delta_hat).abs() < 1e-12);
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(0, 20);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.16113).abs() < 1e-4);
        let (lo, hi) = wilson_interval(10, 20);
        assert!(lo < 0.5 && hi > 0.5 && (0.5 - lo - (hi - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn trials_must_be_positive() {
        let r = rip_probability(
            &span(2, &[1]),
            &WeightFunction::Uniform,
            5,
            0.5,
            0,
            0,
            RipMethod::Spectral,
            Exec::Sequential,
        );
        assert!(r.is_err());
    }

    #[test]
    fn single_trial_is_deterministic() {
        let run = |exec| {
            rip_probability(
                &span(3, &[0, 1, 2]),
                &WeightFunction::Uniform,
                20,
                0.5,
                1,
                11,
                RipMethod::Spectral,
                exec,
            )
            .unwrap()
        };
        assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "n,delta,trials,failures,rate,wilson_lo,wilson_hi,exponent\n"
        );
    }
}
