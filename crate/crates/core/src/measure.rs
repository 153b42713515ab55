//! The probability space [-1, 1]^M with ρ = (dx/2)^⊗M, weight functions,
//! weighted sampling and the norms built on them.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::basis::{legendre_values, CoeffTensor, TensorBasis};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::Grid;
use crate::quadrature::GaussLegendre;
use crate::variation::{VariationFn, MAX_QUADRATURE_MODES};

/// Points of the per-mode CDF tabulation.
pub const CDF_POINTS: usize = 2048;
/// Safety factor on the grid maximum of the rejection ratio.
pub const ENVELOPE_FACTOR: f64 = 1.01;
const CELL_NODES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Domain {
    num_modes: usize,
}

impl Domain {
    pub fn new(num_modes: usize) -> Result<Self> {
        if num_modes == 0 {
            return Err(Error::InvalidArgument("the domain needs at least one mode".into()));
        }
        Ok(Self { num_modes })
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }
}

/// A univariate sampling density p on [-1, 1] with ∫p dρ = 1, tabulated for
/// inverse-CDF sampling.
#[derive(Clone)]
pub struct ModeDensity {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    norm: f64,
    knots: Vec<f64>,
    cdf: Vec<f64>,
}

impl fmt::Debug for ModeDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModeDensity").field("name", &self.name).finish()
    }
}

impl ModeDensity {
    /// Normalizes `f` (which must be positive on [-1, 1]) by 64-node
    /// Gauss–Legendre and tabulates its CDF on 2048 equispaced knots.
    pub fn new(name: impl Into<String>, f: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Result<Self> {
        let name = name.into();
        let knots: Vec<f64> = (0..CDF_POINTS)
            .map(|j| -1.0 + 2.0 * j as f64 / (CDF_POINTS - 1) as f64)
            .collect();
        let gl = GaussLegendre::standard();
        let cell = GaussLegendre::new(CELL_NODES);
        for &x in knots.iter().chain(&gl.nodes).chain(&cell.nodes) {
            let v = f(x);
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("density {name} is {v} at {x}")));
            }
        }
        let norm = gl.integrate(&*f);
        let mut cdf = Vec::with_capacity(CDF_POINTS);
        cdf.push(0.0);
        for w in knots.windows(2) {
            let mass = cell.integrate_on(w[0], w[1], &*f);
            cdf.push(cdf.last().unwrap() + mass);
        }
        let total = *cdf.last().unwrap();
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Self {
            name,
            f,
            norm,
            knots,
            cdf,
        })
    }

    /// p(t) ∝ Σ_{k<d} b_k(t)², the optimal density of a d-dimensional
    /// Legendre span.
    pub fn legendre_optimal(d: usize) -> Result<Self> {
        Self::new(
            format!("legendre_optimal_{d}"),
            Arc::new(move |t| {
                let mut v = vec![0.0; d];
                legendre_values(t, &mut v);
                v.iter().map(|x| x * x).sum::<f64>() / d as f64
            }),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Normalized density value.
    pub fn density(&self, t: f64) -> f64 {
        (self.f)(t) / self.norm
    }

    /// Tabulated CDF at `t`, by linear interpolation.
    pub fn cdf(&self, t: f64) -> f64 {
        let t = t.clamp(-1.0, 1.0);
        let pos = (t + 1.0) / 2.0 * (CDF_POINTS - 1) as f64;
        let j = (pos.floor() as usize).min(CDF_POINTS - 2);
        let frac = pos - j as f64;
        self.cdf[j] + frac * (self.cdf[j + 1] - self.cdf[j])
    }

    /// Inverse of the tabulated CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        let j = self.cdf.partition_point(|&c| c <= u).clamp(1, CDF_POINTS - 1) - 1;
        let (c0, c1) = (self.cdf[j], self.cdf[j + 1]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        (self.knots[j] + frac.clamp(0.0, 1.0) * (self.knots[j + 1] - self.knots[j])).clamp(-1.0, 1.0)
    }
}

/// Optimal weight tabulated from a variation function: w = l1/𝕂.
#[derive(Clone, Debug)]
pub struct VariationWeight {
    pub variation: Arc<VariationFn>,
    pub l1: f64,
    /// Rejection envelope for the density 𝕂/l1 under a uniform proposal.
    pub envelope: f64,
}

/// A weight w > 0 with ∫w⁻¹dρ = 1; samples are drawn from w⁻¹ρ.
#[derive(Clone, Debug)]
pub enum WeightFunction {
    Uniform,
    /// w(y) = 1/Π_m p_m(y_m).
    Separable(Vec<ModeDensity>),
    FromVariation(VariationWeight),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Uniform,
    Separable,
    FromVariation,
}

impl WeightFunction {
    /// Product of per-mode optimal Legendre densities; optimal for the full
    /// tensor space with these dimensions.
    pub fn separable_optimal(dims: &[usize]) -> Result<Self> {
        Ok(WeightFunction::Separable(
            dims.iter()
                .map(|&d| ModeDensity::legendre_optimal(d))
                .collect::<Result<_>>()?,
        ))
    }

    /// w = ‖𝕂‖_{L¹}/𝕂. Fails if 𝕂 vanishes at a point of the standard grid.
    pub fn from_variation(k: Arc<VariationFn>, domain: &Domain) -> Result<Self> {
        if k.num_modes() != domain.num_modes() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} modes", domain.num_modes()),
                got: format!("{}", k.num_modes()),
            });
        }
        let l1 = k.integrate()?;
        let grid = Grid::standard(domain.num_modes())?;
        let values = k.eval_many(&grid, Exec::Parallel)?;
        let mut max_ratio: f64 = 0.0;
        for (i, &v) in values.iter().enumerate() {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::ZeroVariation {
                    point: grid.point(i).to_vec(),
                });
            }
            max_ratio = max_ratio.max(v / l1);
        }
        Ok(WeightFunction::FromVariation(VariationWeight {
            variation: k,
            l1,
            envelope: ENVELOPE_FACTOR * max_ratio,
        }))
    }

    pub fn kind(&self) -> WeightKind {
        match self {
            WeightFunction::Uniform => WeightKind::Uniform,
            WeightFunction::Separable(_) => WeightKind::Separable,
            WeightFunction::FromVariation(_) => WeightKind::FromVariation,
        }
    }

    /// Number of modes the weight is defined on, if fixed.
    pub fn num_modes(&self) -> Option<usize> {
        match self {
            WeightFunction::Uniform => None,
            WeightFunction::Separable(p) => Some(p.len()),
            WeightFunction::FromVariation(v) => Some(v.variation.num_modes()),
        }
    }

    fn check_modes(&self, m: usize) -> Result<()> {
        match self.num_modes() {
            Some(n) if n != m => Err(Error::DimensionMismatch {
                expected: format!("{n} coordinates"),
                got: format!("{m}"),
            }),
            _ => Ok(()),
        }
    }

    /// w(y).
    pub fn value(&self, y: &[f64]) -> Result<f64> {
        self.check_modes(y.len())?;
        if let Some(&bad) = y.iter().find(|c| c.abs() > 1.0 || c.is_nan()) {
            return Err(Error::Domain { value: bad });
        }
        Ok(match self {
            WeightFunction::Uniform => 1.0,
            WeightFunction::Separable(p) => 1.0 / p.iter().zip(y).map(|(p, &t)| p.density(t)).product::<f64>(),
            WeightFunction::FromVariation(v) => v.l1 / v.variation.eval(y)?,
        })
    }

    /// ∫w⁻¹dρ by tensor Gauss–Legendre for up to three modes; structurally
    /// (product of per-mode integrals, or ∫𝕂/l1) otherwise.
    pub fn inverse_integral(&self, domain: &Domain) -> Result<f64> {
        let m = domain.num_modes();
        self.check_modes(m)?;
        let gl = GaussLegendre::standard();
        match self {
            WeightFunction::Uniform => Ok(1.0),
            WeightFunction::Separable(p) => Ok(p.iter().map(|p| gl.integrate(|t| p.density(t))).product()),
            WeightFunction::FromVariation(v) => {
                if m > MAX_QUADRATURE_MODES {
                    return Ok(v.variation.integrate()? / v.l1);
                }
                let mut total = 0.0;
                let mut err = None;
                gl.for_each_tensor_node(m, |y, w| match self.value(y) {
                    Ok(x) => total += w / x,
                    Err(e) => err = Some(e),
                });
                err.map_or(Ok(total), Err)
            }
        }
    }
}

/// n points drawn i.i.d. from w⁻¹ρ with their weights.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleBatch {
    pub num_modes: usize,
    /// Row-major, `num_modes` coordinates per point.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub seed: u64,
}

impl SampleBatch {
    /// A batch from explicit points and weights.
    pub fn from_parts(num_modes: usize, points: Vec<f64>, weights: Vec<f64>, seed: u64) -> Result<Self> {
        let grid = Grid::from_points(num_modes, points)?;
        if grid.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} weights", grid.len()),
                got: format!("{}", weights.len()),
            });
        }
        Ok(Self {
            num_modes,
            points: grid.as_flat().to_vec(),
            weights,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.num_modes..(i + 1) * self.num_modes]
    }
}

/// Draws `n` points from w⁻¹ρ with a ChaCha8 stream seeded by `seed`.
pub fn draw_samples(domain: &Domain, weight: &WeightFunction, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let m = domain.num_modes();
    weight.check_modes(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n * m);
    let mut weights = Vec::with_capacity(n);
    match weight {
        WeightFunction::Uniform => {
            points.extend((0..n * m).map(|_| rng.random_range(-1.0..=1.0)));
            weights.resize(n, 1.0);
        }
        WeightFunction::Separable(p) => {
            for _ in 0..n {
                let start = points.len();
                for pm in p {
                    points.push(pm.quantile(rng.random::<f64>()));
                }
                weights.push(weight.value(&points[start..])?);
            }
        }
        WeightFunction::FromVariation(v) => {
            let mut y = vec![0.0; m];
            while weights.len() < n {
                y.iter_mut().for_each(|c| *c = rng.random_range(-1.0..=1.0));
                let k = v.variation.eval(&y)?;
                let ratio = k / v.l1 / v.envelope;
                if ratio > 1.0 {
                    return Err(Error::EnvelopeViolation { ratio, point: y });
                }
                if rng.random::<f64>() < ratio {
                    points.extend_from_slice(&y);
                    weights.push(v.l1 / k);
                }
            }
        }
    }
    Ok(SampleBatch {
        num_modes: m,
        points,
        weights,
        seed,
    })
}

/// ‖v‖_y = ((1/n) Σ w(yⁱ) v(yⁱ)²)^{1/2}.
pub fn empirical_norm<F: Fn(&[f64]) -> f64>(v: F, batch: &SampleBatch) -> f64 {
    let n = batch.len() as f64;
    let s: f64 = (0..batch.len())
        .map(|i| batch.weights[i] * v(batch.point(i)).powi(2))
        .sum();
    (s / n).sqrt()
}

/// Empirical norm of a function given by coefficients.
pub fn empirical_norm_coeffs(c: &CoeffTensor, batch: &SampleBatch) -> Result<f64> {
    let table = TensorBasis::legendre(&c.dims()).table(&batch.points)?;
    let mut scratch = Vec::new();
    let values: Vec<f64> = (0..batch.len())
        .map(|i| c.eval_view(table.point(i), &mut scratch))
        .collect();
    let n = batch.len() as f64;
    Ok((values.iter().zip(&batch.weights).map(|(v, w)| w * v * v).sum::<f64>() / n).sqrt())
}

/// ‖v‖_{L²(ρ)}, the Euclidean norm of the coefficients.
pub fn ambient_norm(c: &CoeffTensor) -> f64 {
    c.norm()
}

/// max over the grid of √w·|v|, a lower bound of ‖v‖_{w,∞}.
pub fn weighted_sup_norm<F: Fn(&[f64]) -> f64>(v: F, weight: &WeightFunction, grid: &Grid) -> Result<f64> {
    let mut best: f64 = 0.0;
    for y in grid.iter() {
        best = best.max(weight.value(y)?.sqrt() * v(y).abs());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_batch() {
        let d = Domain::new(1).unwrap();
        let b = draw_samples(&d, &WeightFunction::Uniform, 3, 7).unwrap();
        assert_eq!(b.len(), 3);
        assert!(b.weights.iter().all(|&w| w == 1.0));
        assert!(b.points.iter().all(|c| c.abs() <= 1.0));
        assert_eq!(b, draw_samples(&d, &WeightFunction::Uniform, 3, 7).unwrap());
        assert!(draw_samples(&d, &WeightFunction::Uniform, 0, 7).is_err());
    }

    #[test]
    fn empirical_norm_formula() {
        let b = SampleBatch::from_parts(1, vec![0.1, 0.2], vec![1.0, 1.0], 0).unwrap();
        let v = |y: &[f64]| if y[0] < 0.15 { 1.0 } else { 3.0 };
        assert!((empirical_norm(v, &b) - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(empirical_norm(|_| 0.0, &b), 0.0);
    }

    #[test]
    fn ambient_norm_examples() {
        assert_eq!(ambient_norm(&CoeffTensor::dense(vec![2], vec![3.0, 4.0]).unwrap()), 5.0);
        assert_eq!(ambient_norm(&CoeffTensor::zeros(&[3])), 0.0);
    }

    #[test]
    fn weighted_sup_examples() {
        let g = Grid::from_points(1, vec![0.5, 1.0]).unwrap();
        let d = Domain::new(1).unwrap();
        let k = Arc::new(VariationFn::custom(
            1,
            Arc::new(|y: &[f64]| y[0] * y[0]),
            crate::variation::Certificate::Exact,
            "y^2",
        ));
        // w = l1/y² with l1 = 1/3; rescale to w = 1/y²
        let w = WeightFunction::from_variation(k, &d);
        assert!(matches!(w, Err(Error::ZeroVariation { .. })));
        let v = |y: &[f64]| y[0];
        let sep = WeightFunction::Separable(vec![ModeDensity::new("sq", Arc::new(|t: f64| 0.25 + t * t)).unwrap()]);
        let s = weighted_sup_norm(v, &sep, &g).unwrap();
        let p = |t: f64| (0.25 + t * t) / (0.25 + 1.0 / 3.0);
        let expect = f64::max(0.5 / p(0.5).sqrt(), 1.0 / p(1.0).sqrt());
        assert!((s - expect).abs() < 1e-12);
        assert_eq!(weighted_sup_norm(|_| 1.0, &WeightFunction::Uniform, &g).unwrap(), 1.0);
    }

    #[test]
    fn separable_density_is_normalized() {
        let w = WeightFunction::separable_optimal(&[3, 4]).unwrap();
        let d = Domain::new(2).unwrap();
        assert!((w.inverse_integral(&d).unwrap() - 1.0).abs() < 1e-12);
        if let WeightFunction::Separable(p) = &w {
            assert!((p[0].cdf(1.0) - 1.0).abs() < 1e-15);
            assert!(p[0].cdf(-1.0).abs() < 1e-15);
            for u in [0.01, 0.3, 0.5, 0.77, 0.99] {
                assert!((p[0].cdf(p[0].quantile(u)) - u).abs() < 1e-9);
            }
            // symmetric density
            assert!((p[1].cdf(0.0) - 0.5).abs() < 1e-9);
        }
    }
}
