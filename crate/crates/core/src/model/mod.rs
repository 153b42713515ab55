//! Model classes A ⊆ V, their projections and random unit elements.

pub mod knapsack;
pub mod lowrank;
pub mod rank1;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{flat_index, CoeffTensor};
use crate::error::{Error, Result};
use knapsack::Knapsack;
use lowrank::TangentSpace;
use rank1::DenseView;

/// Draws failing in a row before [`Error::Degenerate`] is raised.
pub const MAX_DEGENERATE_DRAWS: usize = 64;
/// Minimum norm of a usable draw.
pub const DEGENERATE_NORM: f64 = 1e-12;
/// Fixed seed of the random restarts inside rank-1 projections.
const PROJECTION_SEED: u64 = 0x5eed;

/// A subset of the coefficient space, described by its structure.
///
/// JSON form is tagged by `"variant"`, e.g.
/// `{"variant": "low_rank_matrix", "rows": 4, "cols": 4, "rank": 1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelClass {
    /// Span of the basis functions with the listed multi-indices.
    LinearSpan {
        dims: Vec<usize>,
        indices: Vec<Vec<usize>>,
    },
    FullSpace {
        dims: Vec<usize>,
    },
    /// {v : Σ_{k∈supp v} ω_k² ≤ s²}; `weights` is indexed by flat position.
    WeightedSparse {
        dims: Vec<usize>,
        weights: Vec<f64>,
        budget: f64,
    },
    LowRankMatrix {
        rows: usize,
        cols: usize,
        rank: usize,
    },
    Rank1Cone {
        dims: Vec<usize>,
    },
    /// The one-element set {element}.
    Singleton {
        element: CoeffTensor,
    },
    /// {anchor} − inner.
    Shift {
        anchor: CoeffTensor,
        inner: Box<ModelClass>,
    },
    Union {
        members: Vec<ModelClass>,
    },
    /// inner ∩ B(center, radius).
    Ball {
        center: CoeffTensor,
        radius: f64,
        inner: Box<ModelClass>,
    },
    /// Tangent space of the rank-`rank` matrices at `at`, as a linear space.
    TangentLowRank {
        at: CoeffTensor,
        rank: usize,
    },
}

/// Outcome of [`project`].
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub point: CoeffTensor,
    /// Another minimizer was detected.
    pub nonunique: bool,
    /// False when a heuristic was used (greedy knapsack, power iteration,
    /// ball clamping).
    pub certified: bool,
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("invalid dims {dims:?}")));
    }
    Ok(())
}

fn same_dims(a: &[usize], b: &[usize], what: &str) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: format!("{what} dims {a:?}"),
            got: format!("{b:?}"),
        });
    }
    Ok(())
}

impl ModelClass {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelClass::LinearSpan { dims, indices } => {
                check_dims(dims)?;
                if indices.is_empty() {
                    return Err(Error::InvalidArgument("empty index set".into()));
                }
                let mut flat = indices
                    .iter()
                    .map(|i| flat_index(dims, i))
                    .collect::<Result<Vec<_>>>()?;
                flat.sort_unstable();
                if flat.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::InvalidArgument("repeated multi-index".into()));
                }
                Ok(())
            }
            ModelClass::FullSpace { dims } | ModelClass::Rank1Cone { dims } => check_dims(dims),
            ModelClass::WeightedSparse { dims, weights, budget } => {
                check_dims(dims)?;
                let total: usize = dims.iter().product();
                if weights.len() != total {
                    return Err(Error::DimensionMismatch {
                        expected: format!("{total} weights"),
                        got: format!("{}", weights.len()),
                    });
                }
                if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 1.0)) {
                    return Err(Error::InvalidArgument(format!("sparsity weight {w} < 1")));
                }
                if !(budget.is_finite() && *budget > 0.0) {
                    return Err(Error::InvalidArgument(format!("budget {budget} must be positive")));
                }
                Ok(())
            }
            ModelClass::LowRankMatrix { rows, cols, rank } => {
                if *rows == 0 || *cols == 0 || *rank == 0 || *rank > (*rows).min(*cols) {
                    return Err(Error::InvalidArgument(format!(
                        "rank {rank} impossible for {rows}x{cols} matrices"
                    )));
                }
                Ok(())
            }
            ModelClass::Singleton { element } => {
                if !element.is_finite() || element.norm() < DEGENERATE_NORM {
                    return Err(Error::InvalidArgument(
                        "singleton element must be finite and nonzero".into(),
                    ));
                }
                Ok(())
            }
            ModelClass::Shift { anchor, inner } => {
                inner.validate()?;
                if !anchor.is_finite() {
                    return Err(Error::InvalidArgument("anchor is not finite".into()));
                }
                same_dims(&inner.dims(), &anchor.dims(), "inner class")
            }
            ModelClass::Union { members } => {
                let first = members
                    .first()
                    .ok_or_else(|| Error::InvalidArgument("empty union".into()))?;
                for m in members {
                    m.validate()?;
                    same_dims(&first.dims(), &m.dims(), "union member")?;
                }
                Ok(())
            }
            ModelClass::Ball { center, radius, inner } => {
                inner.validate()?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidArgument(format!("radius {radius} must be positive")));
                }
                same_dims(&inner.dims(), &center.dims(), "inner class")
            }
            ModelClass::TangentLowRank { at, rank } => {
                if at.num_modes() != 2 {
                    return Err(Error::InvalidArgument("tangent space needs a matrix".into()));
                }
                TangentSpace::at(&at.to_matrix(), *rank).map(|_| ())
            }
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match self {
            ModelClass::LinearSpan { dims, .. }
            | ModelClass::FullSpace { dims }
            | ModelClass::WeightedSparse { dims, .. }
            | ModelClass::Rank1Cone { dims } => dims.clone(),
            ModelClass::LowRankMatrix { rows, cols, .. } => vec![*rows, *cols],
            ModelClass::Singleton { element } => element.dims(),
            ModelClass::Shift { inner, .. } | ModelClass::Ball { inner, .. } => inner.dims(),
            ModelClass::Union { members } => members[0].dims(),
            ModelClass::TangentLowRank { at, .. } => at.dims(),
        }
    }

    /// Linear subspaces, for which the RIP deviation is spectral.
    pub fn is_linear(&self) -> bool {
        matches!(
            self,
            ModelClass::LinearSpan { .. } | ModelClass::FullSpace { .. } | ModelClass::TangentLowRank { .. }
        )
    }

    /// Closed under positive scaling.
    pub fn is_cone(&self) -> bool {
        match self {
            ModelClass::LinearSpan { .. }
            | ModelClass::FullSpace { .. }
            | ModelClass::WeightedSparse { .. }
            | ModelClass::LowRankMatrix { .. }
            | ModelClass::Rank1Cone { .. }
            | ModelClass::TangentLowRank { .. } => true,
            ModelClass::Union { members } => members.iter().all(ModelClass::is_cone),
            _ => false,
        }
    }

    /// Orthonormal frame of a linear class.
    pub fn linear_frame(&self) -> Option<LinearFrame> {
        match self {
            ModelClass::LinearSpan { dims, indices } => Some(LinearFrame::Indices {
                dims: dims.clone(),
                indices: indices.clone(),
            }),
            ModelClass::FullSpace { dims } => {
                let total: usize = dims.iter().product();
                Some(LinearFrame::Indices {
                    dims: dims.clone(),
                    indices: (0..total).map(|f| crate::basis::multi_index(dims, f)).collect(),
                })
            }
            ModelClass::TangentLowRank { at, rank } => {
                let t = TangentSpace::at(&at.to_matrix(), *rank).ok()?;
                Some(LinearFrame::Elements {
                    dims: at.dims(),
                    elements: t.frame(),
                })
            }
            _ => None,
        }
    }
}

/// Orthonormal basis of a linear class: basis multi-indices or general
/// coefficient tensors.
#[derive(Clone, Debug)]
pub enum LinearFrame {
    Indices {
        dims: Vec<usize>,
        indices: Vec<Vec<usize>>,
    },
    Elements {
        dims: Vec<usize>,
        elements: Vec<CoeffTensor>,
    },
}

impl LinearFrame {
    pub fn len(&self) -> usize {
        match self {
            LinearFrame::Indices { indices, .. } => indices.len(),
            LinearFrame::Elements { elements, .. } => elements.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> &[usize] {
        match self {
            LinearFrame::Indices { dims, .. } | LinearFrame::Elements { dims, .. } => dims,
        }
    }

    /// The frame elements as coefficient tensors.
    pub fn elements(&self) -> Vec<CoeffTensor> {
        match self {
            LinearFrame::Indices { dims, indices } => indices
                .iter()
                .map(|i| CoeffTensor::unit(dims, i).expect("validated index"))
                .collect(),
            LinearFrame::Elements { elements, .. } => elements.clone(),
        }
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// A random member of the class (not normalized); `None` for a degenerate draw.
fn sample_member(class: &ModelClass, rng: &mut ChaCha8Rng) -> Result<Option<CoeffTensor>> {
    Ok(Some(match class {
        ModelClass::LinearSpan { dims, indices } => {
            let mut data = vec![0.0; dims.iter().product()];
            for i in indices {
                data[flat_index(dims, i)?] = StandardNormal.sample(rng);
            }
            CoeffTensor::dense(dims.clone(), data)?
        }
        ModelClass::FullSpace { dims } => CoeffTensor::dense(dims.clone(), gaussian_vec(rng, dims.iter().product()))?,
        ModelClass::WeightedSparse { dims, weights, budget } => {
            let ks = Knapsack::new(weights.iter().map(|w| w * w).collect(), budget * budget);
            let mut order: Vec<usize> = (0..weights.len()).collect();
            order.shuffle(rng);
            let mut data = vec![0.0; weights.len()];
            for k in ks.maximal_support(&order) {
                data[k] = StandardNormal.sample(rng);
            }
            CoeffTensor::dense(dims.clone(), data)?
        }
        ModelClass::LowRankMatrix { rows, cols, rank } => {
            let u = DMatrix::from_vec(*rows, *rank, gaussian_vec(rng, rows * rank));
            let v = DMatrix::from_vec(*cols, *rank, gaussian_vec(rng, cols * rank));
            CoeffTensor::from_matrix(&(u * v.transpose()))
        }
        ModelClass::Rank1Cone { dims } => CoeffTensor::rank1(dims.iter().map(|&d| gaussian_vec(rng, d)).collect())?,
        ModelClass::Singleton { element } => element.clone(),
        ModelClass::Shift { anchor, inner } => {
            let Some(mut m) = sample_member(inner, rng)? else {
                return Ok(None);
            };
            if inner.is_cone() {
                // spread the member over scales comparable to the anchor
                let Some(unit) = m.normalized() else {
                    return Ok(None);
                };
                let s = rng.random_range(0.0..2.0 * anchor.norm().max(1.0));
                m = unit.scaled(s);
            }
            anchor.sub(&m)?
        }
        ModelClass::Union { members } => {
            let i = rng.random_range(0..members.len());
            return sample_member(&members[i], rng);
        }
        ModelClass::Ball { center, radius, inner } => {
            let dims = center.dims();
            let g = CoeffTensor::dense(dims.clone(), gaussian_vec(rng, dims.iter().product()))?;
            let Some(g) = g.normalized() else {
                return Ok(None);
            };
            let eps = radius * rng.random_range(0.0..1.0);
            let m = project(inner, &center.add_scaled(eps, &g)?)?.point;
            if m.distance(center)? > *radius {
                return Ok(None);
            }
            m
        }
        ModelClass::TangentLowRank { at, rank } => {
            let t = TangentSpace::at(&at.to_matrix(), *rank)?;
            let x = DMatrix::from_vec(t.rows(), t.cols(), gaussian_vec(rng, t.rows() * t.cols()));
            CoeffTensor::from_matrix(&t.project(&x))
        }
    }))
}

/// A random element of U(A) = {a/‖a‖ : a ∈ A∖{0}}. For a `Shift` class this
/// is (u − m)/‖u − m‖ for a random member m of the inner class.
pub fn sample_unit_element(class: &ModelClass, seed: u64) -> Result<CoeffTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_unit_element_with(class, &mut rng)
}

pub(crate) fn sample_unit_element_with(class: &ModelClass, rng: &mut ChaCha8Rng) -> Result<CoeffTensor> {
    for _ in 0..MAX_DEGENERATE_DRAWS {
        if let Some(m) = sample_member(class, rng)? {
            if m.norm() >= DEGENERATE_NORM {
                if let Some(u) = m.normalized() {
                    return Ok(u);
                }
            }
        }
    }
    Err(Error::Degenerate(MAX_DEGENERATE_DRAWS))
}

/// A best approximation of `v` in the class.
pub fn project(class: &ModelClass, v: &CoeffTensor) -> Result<Projection> {
    if !v.is_finite() {
        return Err(Error::InvalidArgument("cannot project a non-finite tensor".into()));
    }
    same_dims(&class.dims(), &v.dims(), "class")?;
    let exact = |point| Projection {
        point,
        nonunique: false,
        certified: true,
    };
    Ok(match class {
        ModelClass::LinearSpan { dims, indices } => {
            let src = v.to_dense_data();
            let mut data = vec![0.0; src.len()];
            for i in indices {
                let f = flat_index(dims, i)?;
                data[f] = src[f];
            }
            exact(CoeffTensor::dense(dims.clone(), data)?)
        }
        ModelClass::FullSpace { .. } => exact(v.to_dense()),
        ModelClass::WeightedSparse { dims, weights, budget } => {
            let data = v.to_dense_data();
            let ks = Knapsack::new(weights.iter().map(|w| w * w).collect(), budget * budget);
            let sol = ks.solve(&data.iter().map(|x| x * x).collect::<Vec<_>>());
            let mut out = vec![0.0; data.len()];
            for k in sol.chosen {
                out[k] = data[k];
            }
            Projection {
                point: CoeffTensor::dense(dims.clone(), out)?,
                nonunique: sol.tied,
                certified: sol.exact,
            }
        }
        ModelClass::LowRankMatrix { rank, .. } => {
            let (m, tied) = lowrank::truncate(&v.to_matrix(), *rank);
            Projection {
                point: CoeffTensor::from_matrix(&m),
                nonunique: tied,
                certified: true,
            }
        }
        ModelClass::Rank1Cone { dims } => match dims.len() {
            1 => exact(v.to_dense()),
            2 => {
                let s = lowrank::svd(&v.to_matrix());
                let tied = s.sigma.len() > 1
                    && s.sigma[1] > lowrank::RANK_TOL
                    && (s.sigma[0] - s.sigma[1]).abs() < lowrank::RANK_TOL;
                let u: Vec<f64> = s.u.column(0).iter().map(|x| x * s.sigma[0]).collect();
                Projection {
                    point: CoeffTensor::rank1(vec![u, s.v.column(0).iter().copied().collect()])?,
                    nonunique: tied,
                    certified: true,
                }
            }
            _ => {
                let data = v.to_dense_data();
                let fit = rank1::best_rank1(&DenseView { dims, data: &data }, None, PROJECTION_SEED);
                Projection {
                    point: fit.to_tensor(),
                    nonunique: false,
                    certified: false,
                }
            }
        },
        ModelClass::Singleton { element } => exact(element.clone()),
        ModelClass::Shift { anchor, inner } => {
            let p = project(inner, &anchor.sub(v)?)?;
            Projection {
                point: anchor.sub(&p.point)?,
                ..p
            }
        }
        ModelClass::Union { members } => {
            let mut best: Option<(f64, Projection)> = None;
            let mut tie = false;
            for m in members {
                let p = project(m, v)?;
                let d = v.distance(&p.point)?;
                match &best {
                    Some((bd, bp)) if (d - bd).abs() <= 1e-12 * bd.max(1.0) => {
                        if p.point.distance(&bp.point)? > 1e-12 {
                            tie = true;
                        }
                    }
                    Some((bd, _)) if d > *bd => {}
                    _ => {
                        tie = false;
                        best = Some((d, p));
                    }
                }
            }
            let (_, p) = best.expect("validated nonempty union");
            Projection {
                nonunique: p.nonunique || tie,
                ..p
            }
        }
        ModelClass::Ball { center, radius, inner } => project_ball(center, *radius, inner, v)?,
        ModelClass::TangentLowRank { at, rank } => {
            let t = TangentSpace::at(&at.to_matrix(), *rank)?;
            exact(CoeffTensor::from_matrix(&t.project(&v.to_matrix())))
        }
    })
}

/// Projects onto the inner class; if that leaves the ball, bisects along the
/// segment from the center towards `v` for the farthest point whose
/// projection stays inside.
fn project_ball(center: &CoeffTensor, radius: f64, inner: &ModelClass, v: &CoeffTensor) -> Result<Projection> {
    let p = project(inner, v)?;
    if p.point.distance(center)? <= radius {
        return Ok(p);
    }
    let at = |t: f64| -> Result<Projection> {
        let q = center.add_scaled(t, &v.sub(center)?)?;
        project(inner, &q)
    };
    let base = at(0.0)?;
    if base.point.distance(center)? > radius {
        return Err(Error::Construction(
            "ball center is too far from the inner class".into(),
        ));
    }
    let (mut lo, mut hi, mut best) = (0.0, 1.0, base);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        let q = at(mid)?;
        if q.point.distance(center)? <= radius {
            lo = mid;
            best = q;
        } else {
            hi = mid;
        }
    }
    Ok(Projection {
        certified: false,
        ..best
    })
}

/// ‖v − P_A v‖.
pub fn membership_distance(class: &ModelClass, v: &CoeffTensor) -> Result<f64> {
    v.distance(&project(class, v)?.point)
}

/// ‖v‖_{ω,0} = (Σ_{k∈supp v} ω_k²)^{1/2}.
pub fn weighted_sparsity(weights: &[f64], v: &CoeffTensor) -> f64 {
    v.to_dense_data()
        .iter()
        .zip(weights)
        .filter(|(x, _)| **x != 0.0)
        .map(|(_, w)| w * w)
        .sum::<f64>()
        .sqrt()
}

/// Whether ‖v‖²_{ω,0} + ω_k² > s² for every k outside the support of v,
/// i.e. no index can be added without leaving the class.
pub fn sparse_support_is_saturated(weights: &[f64], budget: f64, v: &CoeffTensor) -> bool {
    let data = v.to_dense_data();
    let used = weighted_sparsity(weights, v).powi(2);
    data.iter()
        .zip(weights)
        .filter(|(x, _)| **x == 0.0)
        .all(|(_, w)| used + w * w > budget * budget)
}
