//! Manifolds with positive reach: charts, tangent projections, Hausdorff
//! distances between point clouds, and numerical checks of the local
//! variation bounds.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{legendre_values, CoeffTensor};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::Grid;
use crate::model::lowrank::{self, TangentSpace, RANK_TOL};
use crate::model::ModelClass;
use crate::rip::derive_seed;
use crate::variation::{
    variation_estimate, variation_exact, variation_local_bound, variation_normal_lowrank, VariationFn,
};

/// Absolute slack on the pointwise bound checks.
pub const CHECK_TOL: f64 = 1e-10;
/// Cloud discretization slack on Hausdorff bounds.
pub const CLOUD_SLACK: f64 = 1.05;
pub const BISECTION_STEPS: usize = 64;
pub const MIN_CLOUD_SIZE: usize = 1000;
/// Allowed relative growth between consecutive gaps in [`klimit_check`].
pub const GAP_NOISE: f64 = 0.10;
/// Halvings of the radius in the kernel-directed candidates of [`klimit_check`].
pub const RADIUS_LADDER: usize = 16;
/// Relative floor on the limit comparison (rounding in u − m for tiny steps).
pub const LIMIT_REL_TOL: f64 = 1e-6;

/// A manifold around an anchor point u. Curves are parametrized so that
/// θ = 0 is the anchor; the low-rank chart is the fixed-rank matrix manifold
/// around `anchor`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldChart {
    /// θ ↦ (R sin θ, R cos θ − R), centered at (0, −R).
    Circle {
        radius: f64,
    },
    /// θ ↦ (θ, −κθ²/2).
    Parabola {
        curvature: f64,
    },
    LowRank {
        anchor: CoeffTensor,
        rank: usize,
    },
}

impl ManifoldChart {
    pub fn validate(&self) -> Result<()> {
        match self {
            ManifoldChart::Circle { radius } if !(radius.is_finite() && *radius > 0.0) => Err(Error::InvalidArgument(
                format!("circle radius {radius} must be positive"),
            )),
            ManifoldChart::Parabola { curvature } if !(curvature.is_finite() && *curvature >= 0.0) => Err(
                Error::InvalidArgument(format!("curvature {curvature} must be finite and nonnegative")),
            ),
            ManifoldChart::LowRank { anchor, rank } => tangent_lowrank(anchor, *rank).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldChart::LowRank { anchor, .. } => anchor.total_dim(),
            _ => 2,
        }
    }

    /// Dimension of the manifold.
    pub fn param_dim(&self) -> Result<usize> {
        Ok(match self {
            ManifoldChart::LowRank { anchor, rank } => tangent_lowrank(anchor, *rank)?.dimension(),
            _ => 1,
        })
    }

    pub fn anchor(&self) -> Vec<f64> {
        match self {
            ManifoldChart::LowRank { anchor, .. } => anchor.to_dense_data(),
            _ => vec![0.0, 0.0],
        }
    }

    /// Reach of the curve at the anchor when known in closed form.
    pub fn reach(&self) -> Option<f64> {
        match self {
            ManifoldChart::Circle { radius } => Some(*radius),
            ManifoldChart::Parabola { curvature } if *curvature > 0.0 => Some(1.0 / curvature),
            _ => None,
        }
    }

    /// Orthonormal tangent frame at the anchor.
    pub fn tangent_frame(&self) -> Result<Vec<Vec<f64>>> {
        Ok(match self {
            ManifoldChart::LowRank { anchor, rank } => tangent_lowrank(anchor, *rank)?
                .frame()
                .iter()
                .map(CoeffTensor::to_dense_data)
                .collect(),
            _ => vec![vec![1.0, 0.0]],
        })
    }

    /// Point of the manifold at parameter θ. For the low-rank chart θ holds
    /// tangent coordinates and the point is the rank truncation of u + Σθᵢtᵢ.
    pub fn embed(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.param_dim()? {
            return Err(Error::DimensionMismatch {
                expected: format!("{} parameters", self.param_dim()?),
                got: format!("{}", theta.len()),
            });
        }
        Ok(match self {
            ManifoldChart::Circle { radius } => {
                let t = theta[0];
                vec![radius * t.sin(), radius * t.cos() - radius]
            }
            ManifoldChart::Parabola { curvature } => {
                let t = theta[0];
                vec![t, -curvature * t * t / 2.0]
            }
            ManifoldChart::LowRank { anchor, rank } => {
                let mut x = anchor.to_dense_data();
                for (c, e) in theta.iter().zip(self.tangent_frame()?) {
                    for (a, b) in x.iter_mut().zip(e) {
                        *a += c * b;
                    }
                }
                self.truncate(&x, *rank)?
            }
        })
    }

    fn matrix(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        match self {
            ManifoldChart::LowRank { anchor, .. } => {
                let d = anchor.dims();
                Some(DMatrix::from_row_slice(d[0], d[1], x))
            }
            _ => None,
        }
    }

    fn truncate(&self, x: &[f64], rank: usize) -> Result<Vec<f64>> {
        let m = self
            .matrix(x)
            .ok_or_else(|| Error::Unsupported("truncation on a curve".into()))?;
        let (t, _) = lowrank::truncate(&m, rank);
        Ok(CoeffTensor::from_matrix(&t).to_dense_data())
    }

    /// Center of the osculating circle at the anchor.
    pub fn curvature_center(&self) -> Option<Vec<f64>> {
        match self {
            ManifoldChart::Circle { radius } => Some(vec![0.0, -radius]),
            ManifoldChart::Parabola { curvature } if *curvature > 0.0 => Some(vec![0.0, -1.0 / curvature]),
            _ => None,
        }
    }

    /// Implicit description of a curve: negative on the center's side.
    fn level(&self, p: &[f64]) -> f64 {
        match self {
            ManifoldChart::Circle { radius } => p[0].hypot(p[1] + radius) - radius,
            ManifoldChart::Parabola { curvature } => p[1] + curvature * p[0] * p[0] / 2.0,
            ManifoldChart::LowRank { .. } => unreachable!("curves only"),
        }
    }

    /// A manifold point associated with a tangent point w: on curves the
    /// intersection of the segment from the curvature center to w with the
    /// curve (bisection); on the low-rank chart the rank truncation of w.
    pub fn manifold_point_for(&self, w: &[f64]) -> Result<Vec<f64>> {
        match self {
            ManifoldChart::LowRank { rank, .. } => self.truncate(w, *rank),
            ManifoldChart::Parabola { curvature } if *curvature == 0.0 => Ok(vec![w[0], 0.0]),
            _ => {
                let c = self.curvature_center().expect("curved chart");
                let at = |s: f64| -> Vec<f64> { c.iter().zip(w).map(|(c, w)| c + s * (w - c)).collect() };
                if self.level(&c) >= 0.0 || self.level(w) < 0.0 {
                    return Err(Error::Construction(
                        "segment from the center does not meet the curve".into(),
                    ));
                }
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..BISECTION_STEPS {
                    let mid = 0.5 * (lo + hi);
                    if self.level(&at(mid)) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(at(hi))
            }
        }
    }

    /// Parameter bound for curve points within distance r of the anchor.
    fn curve_radius_param(&self, r: f64) -> f64 {
        match self {
            ManifoldChart::Circle { radius } => {
                if r >= 2.0 * radius {
                    std::f64::consts::PI
                } else {
                    2.0 * (r / (2.0 * radius)).asin()
                }
            }
            ManifoldChart::Parabola { curvature } => {
                if *curvature == 0.0 {
                    r
                } else {
                    // θ² + κ²θ⁴/4 = r²
                    ((2.0 / (curvature * curvature)) * ((1.0 + (curvature * r).powi(2)).sqrt() - 1.0)).sqrt()
                }
            }
            ManifoldChart::LowRank { .. } => unreachable!("curves only"),
        }
    }

    /// Random tangent coordinates of norm below r.
    fn sample_tangent_coords(&self, r: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let p = self.param_dim()?;
        let g: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&g);
        let s = r * rng.random_range(0.0f64..1.0).powf(1.0 / p as f64);
        Ok(if n > 0.0 {
            g.iter().map(|x| s * x / n).collect()
        } else {
            vec![0.0; p]
        })
    }

    /// A random manifold point within distance r of the anchor.
    fn sample_near(&self, r: f64, rng: &mut ChaCha8Rng) -> Result<Option<Vec<f64>>> {
        let u = self.anchor();
        let v = match self {
            ManifoldChart::LowRank { .. } => {
                let t = self.sample_tangent_coords(r, rng)?;
                self.embed(&t)?
            }
            _ => {
                let t = self.curve_radius_param(r);
                self.embed(&[rng.random_range(-t..=t)])?
            }
        };
        Ok((dist(&u, &v) < r).then_some(v))
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// u + P_T(v − u).
fn project_affine(u: &[f64], frame: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let diff: Vec<f64> = v.iter().zip(u).map(|(a, b)| a - b).collect();
    let mut w = u.to_vec();
    for e in frame {
        let c: f64 = e.iter().zip(&diff).map(|(a, b)| a * b).sum();
        for (x, y) in w.iter_mut().zip(e) {
            *x += c * y;
        }
    }
    w
}

fn check_radii(r: f64, reach: f64) -> Result<()> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius {r} must be finite and nonnegative"
        )));
    }
    if reach.is_nan() || reach <= 0.0 {
        return Err(Error::InvalidArgument(format!("reach {reach} must be positive")));
    }
    Ok(())
}

/// Tangent space of the rank-`rank` matrices at `v`.
pub fn tangent_lowrank(v: &CoeffTensor, rank: usize) -> Result<TangentSpace> {
    if v.num_modes() != 2 {
        return Err(Error::InvalidArgument(format!(
            "tangent space needs a matrix, got {} modes",
            v.num_modes()
        )));
    }
    TangentSpace::at(&v.to_matrix(), rank)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionCheck {
    pub samples: usize,
    pub passed: usize,
    /// max of measured distance − bound.
    pub max_excess: f64,
    /// max |measured − bound|; zero for a tight bound.
    pub max_bound_gap: f64,
    pub max_measured: f64,
    pub containment_ok: bool,
    pub failures: Vec<String>,
    pub pass: bool,
}

impl ProjectionCheck {
    fn new() -> Self {
        Self {
            samples: 0,
            passed: 0,
            max_excess: f64::NEG_INFINITY,
            max_bound_gap: 0.0,
            max_measured: 0.0,
            containment_ok: true,
            failures: Vec::new(),
            pass: false,
        }
    }

    fn record(&mut self, measured: f64, bound: f64, contained: bool) {
        self.samples += 1;
        let ok = measured <= bound + CHECK_TOL && contained;
        self.passed += usize::from(ok);
        self.max_excess = self.max_excess.max(measured - bound);
        self.max_bound_gap = self.max_bound_gap.max((measured - bound).abs());
        self.max_measured = self.max_measured.max(measured);
        self.containment_ok &= contained;
    }

    fn finish(mut self) -> Self {
        self.pass = self.samples > 0 && self.passed == self.samples && self.failures.is_empty();
        self
    }
}

/// For manifold points v with ‖u − v‖ < r, the tangent projection
/// w = u + P_T(v − u) satisfies ‖v − w‖ ≤ ‖u − v‖²/(2R) and ‖u − w‖ ≤ ‖u − v‖.
pub fn check_tangent_projection(
    chart: &ManifoldChart,
    r: f64,
    reach: f64,
    num_samples: usize,
    seed: u64,
) -> Result<ProjectionCheck> {
    chart.validate()?;
    check_radii(r, reach)?;
    let u = chart.anchor();
    let frame = chart.tangent_frame()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ProjectionCheck::new();
    let mut draws = 0;
    while report.samples < num_samples {
        draws += 1;
        if draws > 100 * num_samples.max(1) {
            report.failures.push("too few manifold points inside the ball".into());
            break;
        }
        let Some(v) = chart.sample_near(r, &mut rng)? else {
            continue;
        };
        let w = project_affine(&u, &frame, &v);
        let uv = dist(&u, &v);
        report.record(dist(&v, &w), uv * uv / (2.0 * reach), dist(&u, &w) <= uv + CHECK_TOL);
    }
    Ok(report.finish())
}

/// For tangent points w with ‖u − w‖ < r, the associated manifold point v
/// (see [`ManifoldChart::manifold_point_for`]) satisfies
/// ‖w − v‖ ≤ ‖u − w‖²/(2R) and lies in B(u, r).
pub fn check_manifold_projection(
    chart: &ManifoldChart,
    r: f64,
    reach: f64,
    num_samples: usize,
    seed: u64,
) -> Result<ProjectionCheck> {
    chart.validate()?;
    check_radii(r, reach)?;
    let u = chart.anchor();
    let frame = chart.tangent_frame()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ProjectionCheck::new();
    for _ in 0..num_samples {
        let t = chart.sample_tangent_coords(r, &mut rng)?;
        let mut w = u.clone();
        for (c, e) in t.iter().zip(&frame) {
            for (x, y) in w.iter_mut().zip(e) {
                *x += c * y;
            }
        }
        let v = match chart.manifold_point_for(&w) {
            Ok(v) => v,
            Err(e) => {
                report.failures.push(e.to_string());
                report.samples += 1;
                continue;
            }
        };
        let uw = dist(&u, &w);
        report.record(dist(&w, &v), uw * uw / (2.0 * reach), dist(&u, &v) <= r + CHECK_TOL);
    }
    Ok(report.finish())
}

/// A nonempty finite set of points of one dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    unit: bool,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty point cloud".into()))?
            .len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: format!("{dim} coordinates"),
                got: format!("{}", p.len()),
            });
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        Ok(Self { points, unit: false })
    }

    /// A cloud of unit vectors; fails if some norm is off by more than 1e-10.
    pub fn unit(points: Vec<Vec<f64>>) -> Result<Self> {
        let mut c = Self::new(points)?;
        if let Some(p) = c.points.iter().find(|p| (norm(p) - 1.0).abs() > 1e-10) {
            return Err(Error::InvalidArgument(format!(
                "point of norm {} is not a unit vector",
                norm(p)
            )));
        }
        c.unit = true;
        Ok(c)
    }

    /// Directions (x − origin)/‖x − origin‖ of the points away from `origin`.
    pub fn directions_from(&self, origin: &[f64]) -> Result<Self> {
        let dirs: Vec<Vec<f64>> = self
            .points
            .iter()
            .filter_map(|p| {
                let d: Vec<f64> = p.iter().zip(origin).map(|(a, b)| a - b).collect();
                let n = norm(&d);
                (n > 0.0).then(|| d.iter().map(|x| x / n).collect())
            })
            .collect();
        Self::unit(dirs)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_unit(&self) -> bool {
        self.unit
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

fn one_sided(a: &PointCloud, b: &PointCloud, exec: Exec) -> f64 {
    exec.map(a.len(), |i| {
        b.points
            .iter()
            .map(|q| dist(&a.points[i], q))
            .fold(f64::INFINITY, f64::min)
    })
    .into_iter()
    .fold(0.0, f64::max)
}

/// max{sup_a inf_b ‖a − b‖, sup_b inf_a ‖a − b‖} by pairwise distances.
pub fn hausdorff(a: &PointCloud, b: &PointCloud, exec: Exec) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} coordinates", a.dim()),
            got: format!("{}", b.dim()),
        });
    }
    Ok(one_sided(a, b, exec).max(one_sided(b, a, exec)))
}

/// Hausdorff distance of two cones given by their unit vectors.
pub fn truncated_hausdorff(a: &PointCloud, b: &PointCloud, exec: Exec) -> Result<f64> {
    for c in [a, b] {
        if !c.is_unit() {
            PointCloud::unit(c.points.clone())?;
        }
    }
    hausdorff(a, b, exec)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HausdorffRate {
    pub r: f64,
    /// d_H(N ∩ B(u,r), (u + T) ∩ B(u,r)).
    pub distance: f64,
    /// r²/(2R).
    pub distance_bound: f64,
    /// d_H of the unit directions from u.
    pub direction_distance: f64,
    /// r/R.
    pub direction_bound: f64,
    pub cloud_size: usize,
    pub pass: bool,
}

/// Measures both Hausdorff rates on dense clouds of a curve chart and
/// compares them with r²/(2R) and r/R, with [`CLOUD_SLACK`].
pub fn check_hausdorff_rates(
    chart: &ManifoldChart,
    radii: &[f64],
    reach: f64,
    cloud_size: usize,
    exec: Exec,
) -> Result<Vec<HausdorffRate>> {
    chart.validate()?;
    if matches!(chart, ManifoldChart::LowRank { .. }) {
        return Err(Error::Unsupported(
            "Hausdorff rates are measured on curve charts".into(),
        ));
    }
    if cloud_size < MIN_CLOUD_SIZE {
        return Err(Error::InvalidArgument(format!(
            "cloud size {cloud_size} below {MIN_CLOUD_SIZE}"
        )));
    }
    let u = chart.anchor();
    let e = chart.tangent_frame()?.remove(0);
    radii
        .iter()
        .map(|&r| {
            check_radii(r, reach)?;
            if r > reach {
                return Err(Error::Precondition(format!("radius {r} exceeds the reach {reach}")));
            }
            let t = chart.curve_radius_param(r);
            let step = |i: usize, half: f64| -half + 2.0 * half * i as f64 / (cloud_size - 1) as f64;
            let curve = (0..cloud_size)
                .map(|i| chart.embed(&[step(i, t)]))
                .collect::<Result<Vec<_>>>()?;
            let line: Vec<Vec<f64>> = (0..cloud_size)
                .map(|i| {
                    let s = step(i, r);
                    u.iter().zip(&e).map(|(a, b)| a + s * b).collect()
                })
                .collect();
            let curve = PointCloud::new(curve)?;
            let line = PointCloud::new(line)?;
            let distance = hausdorff(&curve, &line, exec)?;
            let tangent_dirs = PointCloud::unit(vec![e.clone(), e.iter().map(|x| -x).collect()])?;
            let direction_distance = truncated_hausdorff(&curve.directions_from(&u)?, &tangent_dirs, exec)?;
            let distance_bound = r * r / (2.0 * reach);
            let direction_bound = r / reach;
            Ok(HausdorffRate {
                r,
                distance,
                distance_bound,
                direction_distance,
                direction_bound,
                cloud_size,
                pass: distance <= CLOUD_SLACK * distance_bound + CHECK_TOL
                    && direction_distance <= CLOUD_SLACK * direction_bound + CHECK_TOL,
            })
        })
        .collect()
}

/// Pointwise (√K_T + (r/(2R))·√K_⊥)², an upper bound for the variation
/// function of {u} − N ∩ B(u, r) when N has reach R at u.
pub fn kloc_upper(k_tangent: &VariationFn, k_normal: &VariationFn, r: f64, reach: f64) -> Result<VariationFn> {
    check_radii(r, reach)?;
    if r > reach {
        return Err(Error::Precondition(format!("radius {r} exceeds the reach {reach}")));
    }
    variation_local_bound(k_tangent, k_normal, r / (2.0 * reach))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReachBound {
    /// r/2.
    pub reach: f64,
    pub radius: f64,
    pub rank: usize,
    /// σ_R(v).
    pub sigma: f64,
    /// σ_R(v) − r ≥ 0.
    pub radius_margin: f64,
    /// σ_R(v) − r/2 > 0, a lower bound for σ_R(w) on the ball.
    pub gap_margin: f64,
    pub radius_margin_zero: bool,
    pub gap_margin_zero: bool,
}

/// Reach lower bound r/2 of the rank-R matrices within B(v, r), r ≤ σ_R(v).
pub fn reach_lowrank_ball(v: &CoeffTensor, rank: usize, r: f64) -> Result<ReachBound> {
    let t = tangent_lowrank(v, rank)?;
    let sigma = t.sigma[rank - 1];
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius {r} must be positive")));
    }
    let tol = RANK_TOL * sigma.max(1.0);
    if r > sigma + tol {
        return Err(Error::Precondition(format!("radius {r} exceeds sigma_R(v) = {sigma}")));
    }
    let radius_margin = (sigma - r).max(0.0);
    let gap_margin = sigma - r / 2.0;
    Ok(ReachBound {
        reach: r / 2.0,
        radius: r,
        rank,
        sigma,
        radius_margin,
        gap_margin,
        radius_margin_zero: radius_margin <= tol,
        gap_margin_zero: gap_margin <= tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationCheck {
    pub samples: usize,
    pub passed: usize,
    /// min over samples of σ_R(w) − σ_{R+1}(w).
    pub min_gap: f64,
    /// max over samples of ‖T_R(w) − v‖.
    pub max_truncation_distance: f64,
    pub pass: bool,
}

/// Perturbs v by ‖v − w‖ ≤ r/2 and checks that w has a unique rank-R
/// truncation which stays within distance r of v.
pub fn reach_perturbation_check(
    v: &CoeffTensor,
    rank: usize,
    r: f64,
    num_samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<PerturbationCheck> {
    reach_lowrank_ball(v, rank, r)?;
    let m = v.to_matrix();
    let (rows, cols) = m.shape();
    let results = exec.map(num_samples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let g = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
        let s = r / 2.0 * rng.random_range(0.0f64..=1.0).powf(1.0 / (rows * cols) as f64);
        let w = &m + g.scale(s / g.norm());
        let sv = lowrank::singular_values(&w);
        let gap = sv[rank - 1] - sv.get(rank).copied().unwrap_or(0.0);
        let (t, _) = lowrank::truncate(&w, rank);
        (gap, (t - &m).norm())
    });
    let passed = results.iter().filter(|(g, d)| *g > 0.0 && *d <= r).count();
    Ok(PerturbationCheck {
        samples: num_samples,
        passed,
        min_gap: results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
        max_truncation_distance: results.iter().map(|r| r.1).fold(0.0, f64::max),
        pass: num_samples > 0 && passed == num_samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalBoundConfig {
    pub anchor: CoeffTensor,
    pub rank: usize,
    /// Ball radii, in decreasing order.
    pub radii: Vec<f64>,
    /// Reach used in the upper bound.
    pub reach: f64,
    pub num_samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalBoundRow {
    pub r: f64,
    /// max over the grid of estimate − upper bound.
    pub max_excess: f64,
    pub bound_ok: bool,
    /// max over the grid of |estimate − K_T|.
    pub gap: f64,
    /// max over the grid of K_T − estimate.
    pub shortfall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalBoundReport {
    pub rows: Vec<LocalBoundRow>,
    /// Shortfall of the same estimator on the tangent space itself.
    pub tol_mc: f64,
    pub gaps_nonincreasing: bool,
    pub limit_ok: bool,
    pub grid_points: usize,
    pub pass: bool,
}

/// Coefficients of the point evaluation at y: b(y₁)b(y₂)ᵀ.
fn point_matrix(t: &TangentSpace, y: &[f64]) -> DMatrix<f64> {
    let mut a = vec![0.0; t.rows()];
    let mut b = vec![0.0; t.cols()];
    legendre_values(y[0], &mut a);
    legendre_values(y[1], &mut b);
    DMatrix::from_fn(t.rows(), t.cols(), |i, j| a[i] * b[j])
}

/// k̂(y)² for the normalized tangent kernel vector, i.e. ‖P_T b(y₁)b(y₂)ᵀ‖².
fn kernel_value(t: &TangentSpace, y: &[f64]) -> f64 {
    t.project(&point_matrix(t, y)).norm_squared()
}

/// max over ε ∈ {r, r/2, …, r/2^L} and both signs of e(y)² where
/// e = (u − m)/‖u − m‖ and m = T_R(u ∓ ε k̂) with k̂ the normalized tangent
/// kernel vector at y. Each m lies in N ∩ B(u, r), so this is a lower bound.
fn kernel_candidates(u: &DMatrix<f64>, t: &TangentSpace, rank: usize, r: f64, y: &[f64]) -> f64 {
    let phi = point_matrix(t, y);
    let k = t.project(&phi);
    let kn = k.norm();
    if kn == 0.0 {
        return 0.0;
    }
    let k = k / kn;
    let mut best: f64 = 0.0;
    for j in 0..=RADIUS_LADDER {
        let eps = r * 0.5f64.powi(j as i32);
        for sign in [1.0, -1.0] {
            let (m, _) = lowrank::truncate(&(u - k.scale(sign * eps)), rank);
            let diff = u - m;
            let n = diff.norm();
            if n > 0.0 && n <= r {
                best = best.max((diff.dot(&phi) / n).powi(2));
            }
        }
    }
    best
}

/// Estimates the variation function of {u} − N ∩ B(u, r) for decreasing r
/// on the rank-R matrices and compares it with the exact tangent variation
/// and the local upper bound. The estimate at y is the larger of a random
/// pool of `num_samples` elements (one seed for all radii) and the
/// kernel-directed candidates at y; both are members of the set.
pub fn klimit_check(cfg: &LocalBoundConfig, grid: &Grid, exec: Exec) -> Result<LocalBoundReport> {
    let t = tangent_lowrank(&cfg.anchor, cfg.rank)?;
    if cfg.radii.is_empty() || cfg.radii.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("radii must be nonempty and decreasing".into()));
    }
    if grid.num_modes() != 2 {
        return Err(Error::DimensionMismatch {
            expected: "a 2-mode grid".into(),
            got: format!("{} modes", grid.num_modes()),
        });
    }
    let dims = cfg.anchor.dims();
    let u = cfg.anchor.to_matrix();
    let tangent_class = ModelClass::TangentLowRank {
        at: cfg.anchor.clone(),
        rank: cfg.rank,
    };
    let k_t = variation_exact(&tangent_class)?;
    let k_n = variation_normal_lowrank(&t);
    let exact = k_t.eval_many(grid, exec)?;
    // the same estimator on the tangent space: the pool plus k̂ itself
    let tangent_mc = variation_estimate(&tangent_class, cfg.num_samples, cfg.seed, exec)?.eval_many(grid, exec)?;
    let kernel_sq: Vec<f64> = exec.map(grid.len(), |i| kernel_value(&t, grid.point(i)));
    let tol_mc = exact
        .iter()
        .zip(tangent_mc.iter().zip(&kernel_sq))
        .map(|(a, (b, c))| a - b.max(*c))
        .fold(0.0, f64::max);
    let mut rows = Vec::with_capacity(cfg.radii.len());
    let mut last = Vec::new();
    for &r in &cfg.radii {
        let upper = kloc_upper(&k_t, &k_n, r, cfg.reach)?.eval_many(grid, exec)?;
        let class = ModelClass::Shift {
            anchor: cfg.anchor.clone(),
            inner: Box::new(ModelClass::Ball {
                center: cfg.anchor.clone(),
                radius: r,
                inner: Box::new(ModelClass::LowRankMatrix {
                    rows: dims[0],
                    cols: dims[1],
                    rank: cfg.rank,
                }),
            }),
        };
        let pool = variation_estimate(&class, cfg.num_samples, cfg.seed, exec)?.eval_many(grid, exec)?;
        let est: Vec<f64> = exec.map(grid.len(), |i| {
            pool[i].max(kernel_candidates(&u, &t, cfg.rank, r, grid.point(i)))
        });
        let max_excess = est
            .iter()
            .zip(&upper)
            .map(|(e, u)| e - u)
            .fold(f64::NEG_INFINITY, f64::max);
        rows.push(LocalBoundRow {
            r,
            max_excess,
            bound_ok: max_excess <= CHECK_TOL,
            gap: est.iter().zip(&exact).map(|(e, k)| (e - k).abs()).fold(0.0, f64::max),
            shortfall: exact
                .iter()
                .zip(&est)
                .map(|(k, e)| k - e)
                .fold(f64::NEG_INFINITY, f64::max),
        });
        last = est;
    }
    let gaps_nonincreasing = rows.windows(2).all(|w| w[1].gap <= (1.0 + GAP_NOISE) * w[0].gap);
    let limit_ok = exact
        .iter()
        .zip(&last)
        .all(|(k, e)| *e >= k - tol_mc - LIMIT_REL_TOL * k.abs() - CHECK_TOL);
    let pass = gaps_nonincreasing && limit_ok && rows.iter().all(|r| r.bound_ok);
    Ok(LocalBoundReport {
        rows,
        tol_mc,
        gaps_nonincreasing,
        limit_ok,
        grid_points: grid.len(),
        pass,
    })
}
