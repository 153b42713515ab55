//! Variation functions 𝕂_A(y) = sup_{a∈U(A)} |a(y)|²: closed forms, Monte
//! Carlo lower bounds, the combination rules and optimal weights.

mod expr;

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{CoeffTensor, TensorBasis};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::Grid;
use crate::measure::{Domain, WeightFunction};
use crate::model::knapsack::Knapsack;
use crate::model::lowrank::TangentSpace;
use crate::model::{membership_distance, sample_unit_element, ModelClass};
use crate::quadrature::GaussLegendre;
pub(crate) use expr::Node;
pub use expr::PointFn;

/// Tensor Gauss–Legendre integration is used up to this many modes.
pub const MAX_QUADRATURE_MODES: usize = 3;
const MEMBERSHIP_TOL: f64 = 1e-10;
const EVAL_CHUNK: usize = 256;

/// What is known about a computed variation function relative to the true one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Certificate {
    Exact,
    /// Maximum over `samples` random unit elements.
    McLowerBound {
        samples: usize,
        seed: u64,
    },
    UpperBound,
    LowerBound,
    /// Mixes upper and lower bounds.
    Indeterminate,
}

impl Certificate {
    pub fn label(&self) -> &'static str {
        match self {
            Certificate::Exact => "exact",
            Certificate::McLowerBound { .. } => "mc_lower_bound",
            Certificate::UpperBound => "upper_bound",
            Certificate::LowerBound => "lower_bound",
            Certificate::Indeterminate => "indeterminate",
        }
    }

    fn is_lower(&self) -> bool {
        matches!(self, Certificate::McLowerBound { .. } | Certificate::LowerBound)
    }

    /// Certificate of a monotone combination (max, sum, product) of the inputs.
    fn monotone(self, other: Certificate) -> Certificate {
        use Certificate::*;
        match (self, other) {
            (Exact, Exact) => Exact,
            (a, b) if a == b => a,
            (Exact | UpperBound, Exact | UpperBound) => UpperBound,
            (a, b) if (a == Exact || a.is_lower()) && (b == Exact || b.is_lower()) => LowerBound,
            _ => Indeterminate,
        }
    }
}

/// An evaluable y ↦ 𝕂(y) on [-1, 1]^M.
#[derive(Clone, Debug)]
pub struct VariationFn {
    node: Node,
    num_modes: usize,
    certificate: Certificate,
    provenance: String,
    /// Variation function of a linear space.
    linear: bool,
}

impl VariationFn {
    fn new(
        node: Node,
        num_modes: usize,
        certificate: Certificate,
        provenance: impl Into<String>,
        linear: bool,
    ) -> Self {
        Self {
            node,
            num_modes,
            certificate,
            provenance: provenance.into(),
            linear,
        }
    }

    /// A variation function given by a closure, with a caller-supplied
    /// certificate.
    pub fn custom(num_modes: usize, f: Arc<PointFn>, certificate: Certificate, provenance: impl Into<String>) -> Self {
        Self::new(
            Node::Custom {
                modes: (0..num_modes).collect(),
                f,
            },
            num_modes,
            certificate,
            provenance,
            false,
        )
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn is_linear_span(&self) -> bool {
        self.linear
    }

    /// Modes the function actually depends on.
    pub fn active_modes(&self) -> Vec<usize> {
        self.node.modes()
    }

    fn check_point(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.num_modes {
            return Err(Error::DimensionMismatch {
                expected: format!("{} coordinates", self.num_modes),
                got: format!("{}", y.len()),
            });
        }
        if let Some(&bad) = y.iter().find(|c| c.abs() > 1.0 || c.is_nan()) {
            return Err(Error::Domain { value: bad });
        }
        Ok(())
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        self.check_point(y)?;
        Ok(self.node.eval(y))
    }

    /// Values at every grid point, in grid order.
    pub fn eval_many(&self, grid: &Grid, exec: Exec) -> Result<Vec<f64>> {
        if grid.num_modes() != self.num_modes {
            return Err(Error::DimensionMismatch {
                expected: format!("{}-mode grid", self.num_modes),
                got: format!("{}", grid.num_modes()),
            });
        }
        Ok(exec.map_chunked(grid.len(), EVAL_CHUNK, |r| {
            r.map(|i| self.node.eval(grid.point(i))).collect()
        }))
    }

    /// The same function seen on a larger domain: mode `m` becomes
    /// `modes[m]` of a `num_modes`-mode domain.
    pub fn on_modes(&self, num_modes: usize, modes: &[usize]) -> Result<Self> {
        if modes.len() != self.num_modes || modes.iter().any(|&m| m >= num_modes) {
            return Err(Error::InvalidArgument(format!(
                "cannot place {} modes at {modes:?} of {num_modes}",
                self.num_modes
            )));
        }
        let mut sorted = modes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != modes.len() {
            return Err(Error::InvalidArgument(format!("repeated modes {modes:?}")));
        }
        Ok(Self {
            node: self.node.remap(modes),
            num_modes,
            ..self.clone()
        })
    }

    /// ∫𝕂 dρ. Sums and products over disjoint modes are integrated term by
    /// term; other nodes by tensor Gauss–Legendre over their modes (at most
    /// [`MAX_QUADRATURE_MODES`]).
    pub fn integrate(&self) -> Result<f64> {
        integrate_node(&self.node, self.num_modes)
    }
}

fn integrate_node(node: &Node, num_modes: usize) -> Result<f64> {
    let gl = GaussLegendre::standard();
    match node {
        Node::Sum(c) => c.iter().map(|n| integrate_node(n, num_modes)).sum(),
        Node::Product(c) if disjoint(c) => c.iter().map(|n| integrate_node(n, num_modes)).product(),
        Node::Frame { elements, .. } => Ok(elements.len() as f64),
        Node::IndexSpan { dims, indices, .. } => {
            // per-mode 1-D integrals of b_k²
            let tables: Vec<Vec<f64>> = dims
                .iter()
                .map(|&d| {
                    let mut acc = vec![0.0; d];
                    let mut v = vec![0.0; d];
                    for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
                        crate::basis::legendre_values(x, &mut v);
                        for (a, b) in acc.iter_mut().zip(&v) {
                            *a += w * b * b;
                        }
                    }
                    acc
                })
                .collect();
            Ok(indices
                .iter()
                .map(|idx| idx.iter().enumerate().map(|(m, &k)| tables[m][k]).product::<f64>())
                .sum())
        }
        _ => {
            let modes = node.modes();
            if modes.len() > MAX_QUADRATURE_MODES {
                return Err(Error::Unsupported(format!(
                    "quadrature over {} coupled modes",
                    modes.len()
                )));
            }
            let mut y = vec![0.0; num_modes];
            let mut total = 0.0;
            gl.for_each_tensor_node(modes.len(), |x, w| {
                for (&m, &c) in modes.iter().zip(x) {
                    y[m] = c;
                }
                total += w * node.eval(&y);
            });
            Ok(total)
        }
    }
}

fn disjoint(nodes: &[Node]) -> bool {
    let mut all: Vec<usize> = nodes.iter().flat_map(Node::modes).collect();
    let n = all.len();
    all.sort_unstable();
    all.dedup();
    all.len() == n
}

fn all_modes(dims: &[usize]) -> Vec<usize> {
    (0..dims.len()).collect()
}

fn product_of_spans(dims: &[usize]) -> Node {
    Node::Product(
        dims.iter()
            .enumerate()
            .map(|(mode, &dim)| Node::Univariate { mode, dim })
            .collect(),
    )
}

fn matrix_columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

/// 𝕂 of a tangent space 𝕋_v = W_L ⊕ W_R of the rank-R matrices:
/// 𝕂_{W_L} + 𝕂_{W_R} with W_L = ⟨U⟩ ⊗ ℝ^cols and W_R = ⟨U⟩^⊥ ⊗ ⟨V⟩.
fn tangent_node(t: &TangentSpace) -> Node {
    let (rows, cols) = (t.rows(), t.cols());
    let mut w_r = Vec::new();
    if t.left_perp.ncols() > 0 {
        w_r.push(Node::Product(vec![
            Node::UnivariateFrame {
                mode: 0,
                dim: rows,
                vectors: matrix_columns(&t.left_perp),
            },
            Node::UnivariateFrame {
                mode: 1,
                dim: cols,
                vectors: matrix_columns(&t.right),
            },
        ]));
    }
    let w_l = Node::Product(vec![
        Node::UnivariateFrame {
            mode: 0,
            dim: rows,
            vectors: matrix_columns(&t.left),
        },
        Node::Univariate { mode: 1, dim: cols },
    ]);
    Node::Sum(std::iter::once(w_l).chain(w_r).collect())
}

/// 𝕂 of the normal space ⟨U⟩^⊥ ⊗ ⟨V⟩^⊥ of the rank-R matrices at a point.
pub fn variation_normal_lowrank(t: &TangentSpace) -> VariationFn {
    let node = if t.left_perp.ncols() == 0 || t.right_perp.ncols() == 0 {
        Node::Custom {
            modes: vec![0, 1],
            f: Arc::new(|_| 0.0),
        }
    } else {
        Node::Product(vec![
            Node::UnivariateFrame {
                mode: 0,
                dim: t.rows(),
                vectors: matrix_columns(&t.left_perp),
            },
            Node::UnivariateFrame {
                mode: 1,
                dim: t.cols(),
                vectors: matrix_columns(&t.right_perp),
            },
        ])
    };
    VariationFn::new(node, 2, Certificate::Exact, "normal space of the rank-R matrices", true)
}

/// 𝕂 of the span of an orthonormal family, Σ_j e_j(y)². Fails if the
/// family is not orthonormal to 1e-8.
pub fn variation_of_frame(elements: Vec<CoeffTensor>) -> Result<VariationFn> {
    let first = elements
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty frame".into()))?;
    let dims = first.dims();
    for (i, a) in elements.iter().enumerate() {
        for (j, b) in elements.iter().enumerate().skip(i) {
            let g = a.dot(b)?;
            let want = if i == j { 1.0 } else { 0.0 };
            if (g - want).abs() > 1e-8 {
                return Err(Error::Precondition(format!(
                    "frame not orthonormal: <e{i}, e{j}> = {g}"
                )));
            }
        }
    }
    Ok(VariationFn::new(
        Node::Frame {
            modes: all_modes(&dims),
            basis: TensorBasis::legendre(&dims),
            elements: Arc::new(elements),
        },
        dims.len(),
        Certificate::Exact,
        "orthonormal frame",
        true,
    ))
}

/// The bound (√𝕂_T + c·√𝕂_N)² built from a tangent and a normal variation
/// function on the same domain.
pub fn variation_local_bound(tangent: &VariationFn, normal: &VariationFn, c: f64) -> Result<VariationFn> {
    if tangent.num_modes != normal.num_modes {
        return Err(Error::DimensionMismatch {
            expected: format!("{} modes", tangent.num_modes),
            got: format!("{}", normal.num_modes),
        });
    }
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "coefficient must be finite and nonnegative, got {c}"
        )));
    }
    Ok(VariationFn::new(
        Node::LocalBound {
            tangent: Box::new(tangent.node.clone()),
            normal: Box::new(normal.node.clone()),
            c,
        },
        tangent.num_modes,
        Certificate::UpperBound,
        "local tangent/normal bound",
        false,
    ))
}

/// Closed-form variation function of a model class.
pub fn variation_exact(class: &ModelClass) -> Result<VariationFn> {
    class.validate()?;
    let dims = class.dims();
    let m = dims.len();
    Ok(match class {
        ModelClass::LinearSpan { dims, indices } => VariationFn::new(
            Node::IndexSpan {
                modes: all_modes(dims),
                dims: dims.clone(),
                indices: indices.clone(),
            },
            m,
            Certificate::Exact,
            "linear span: sum of squared basis functions",
            true,
        ),
        ModelClass::FullSpace { dims } => VariationFn::new(
            product_of_spans(dims),
            m,
            Certificate::Exact,
            "full tensor space: product of per-mode spans",
            true,
        ),
        ModelClass::Rank1Cone { dims } => VariationFn::new(
            product_of_spans(dims),
            m,
            Certificate::Exact,
            "rank-1 cone: equals its ambient tensor space",
            false,
        ),
        ModelClass::LowRankMatrix { .. } => VariationFn::new(
            product_of_spans(&dims),
            m,
            Certificate::Exact,
            "low-rank matrices contain the rank-1 cone: ambient space",
            false,
        ),
        ModelClass::TangentLowRank { at, rank } => {
            let t = TangentSpace::at(&at.to_matrix(), *rank)?;
            VariationFn::new(
                tangent_node(&t),
                2,
                Certificate::Exact,
                "tangent space of the rank-R matrices: K_{W_L} + K_{W_R}",
                true,
            )
        }
        ModelClass::WeightedSparse { dims, weights, budget } => {
            let ks = Knapsack::new(weights.iter().map(|w| w * w).collect(), budget * budget);
            let certificate = if ks.is_exact() {
                Certificate::Exact
            } else {
                Certificate::LowerBound
            };
            VariationFn::new(
                Node::Sparse {
                    modes: all_modes(dims),
                    basis: TensorBasis::legendre(dims),
                    knapsack: Arc::new(ks),
                },
                m,
                certificate,
                "weighted sparsity: union of the admissible coordinate spans",
                false,
            )
        }
        ModelClass::Singleton { element } => VariationFn::new(
            Node::Sampled {
                modes: all_modes(&dims),
                basis: TensorBasis::legendre(&dims),
                elements: Arc::new(vec![element.normalized().expect("validated nonzero")]),
            },
            m,
            Certificate::Exact,
            "singleton",
            false,
        ),
        ModelClass::Shift { anchor, inner } => shifted(anchor, inner)?,
        ModelClass::Union { members } => {
            let parts = members.iter().map(variation_exact).collect::<Result<Vec<_>>>()?;
            let certificate = parts
                .iter()
                .map(|p| p.certificate)
                .reduce(Certificate::monotone)
                .expect("nonempty union");
            VariationFn::new(
                Node::Max(parts.into_iter().map(|p| p.node).collect()),
                m,
                certificate,
                "union: pointwise maximum",
                false,
            )
        }
        ModelClass::Ball { .. } => {
            return Err(Error::Unsupported(
                "no closed form for a ball-restricted class; use variation_estimate".into(),
            ))
        }
    })
}

/// {u} − A: equals 𝕂_A when u ∈ A for linear spaces and for cones whose
/// span is the full tensor space; for a linear A with u ∉ A it is the
/// variation of A ⊕ ⟨u − P_A u⟩.
fn shifted(anchor: &CoeffTensor, inner: &ModelClass) -> Result<VariationFn> {
    let base = variation_exact(inner)?;
    let dist = membership_distance(inner, anchor)?;
    let ambient_cone = matches!(inner, ModelClass::Rank1Cone { .. } | ModelClass::LowRankMatrix { .. });
    if dist <= MEMBERSHIP_TOL && (inner.is_linear() || ambient_cone) {
        return Ok(VariationFn {
            provenance: format!("shift by a member: {}", base.provenance),
            ..base
        });
    }
    if inner.is_linear() {
        let p = crate::model::project(inner, anchor)?.point;
        let perp = anchor.sub(&p)?.normalized().expect("positive distance");
        let dims = anchor.dims();
        let extra = Node::Sampled {
            modes: all_modes(&dims),
            basis: TensorBasis::legendre(&dims),
            elements: Arc::new(vec![perp]),
        };
        return Ok(VariationFn::new(
            Node::Sum(vec![base.node, extra]),
            dims.len(),
            Certificate::Exact,
            "affine shift: span of the class and the anchor's normal part",
            true,
        ));
    }
    Err(Error::Unsupported(
        "no closed form for this shifted class; use variation_estimate".into(),
    ))
}

/// Monte Carlo lower bound: 𝕂 of `num_samples` random unit elements, drawn
/// with seeds `seed, seed + 1, …` and shared by all evaluation points, so a
/// longer run only adds elements.
pub fn variation_estimate(class: &ModelClass, num_samples: usize, seed: u64, exec: Exec) -> Result<VariationFn> {
    class.validate()?;
    if num_samples == 0 {
        return Err(Error::InvalidArgument("num_samples must be positive".into()));
    }
    let elements = exec.try_map(num_samples, |i| sample_unit_element(class, seed.wrapping_add(i as u64)))?;
    let dims = class.dims();
    Ok(VariationFn::new(
        Node::Sampled {
            modes: all_modes(&dims),
            basis: TensorBasis::legendre(&dims),
            elements: Arc::new(elements),
        },
        dims.len(),
        Certificate::McLowerBound {
            samples: num_samples,
            seed,
        },
        "Monte Carlo maximum over random unit elements",
        false,
    ))
}

/// Variation function of an explicit finite set (each element normalized).
pub fn variation_of_elements(elements: Vec<CoeffTensor>, certificate: Certificate) -> Result<VariationFn> {
    let first = elements
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty element list".into()))?;
    let dims = first.dims();
    let elements = elements
        .iter()
        .map(|e| {
            if e.dims() != dims {
                return Err(Error::DimensionMismatch {
                    expected: format!("{dims:?}"),
                    got: format!("{:?}", e.dims()),
                });
            }
            e.normalized().ok_or(Error::Degenerate(1))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VariationFn::new(
        Node::Sampled {
            modes: all_modes(&dims),
            basis: TensorBasis::legendre(&dims),
            elements: Arc::new(elements),
        },
        dims.len(),
        certificate,
        "finite set of elements",
        false,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineRule {
    /// 𝕂_{A∪B} = max(𝕂_A, 𝕂_B).
    Union,
    /// 𝕂_{A+B} ≤ 𝕂_A + 𝕂_B for A ⊥ B, with equality for linear spaces.
    SumOrthogonal,
    /// 𝕂_{A·B} = 𝕂_A·𝕂_B for independent A, B.
    ProductIndependent,
    /// 𝕂_{A⊗B} = 𝕂_A·𝕂_B for linear A, B.
    TensorProduct,
}

/// Combines two variation functions on the same domain. The caller is
/// responsible for the structural hypothesis of the rule; the product rules
/// check that the inputs depend on disjoint modes.
pub fn variation_combine(rule: CombineRule, a: &VariationFn, b: &VariationFn) -> Result<VariationFn> {
    if a.num_modes != b.num_modes {
        return Err(Error::DimensionMismatch {
            expected: format!("{} modes", a.num_modes),
            got: format!("{}", b.num_modes),
        });
    }
    let nodes = vec![a.node.clone(), b.node.clone()];
    let joint = a.certificate.monotone(b.certificate);
    let (node, certificate, provenance, linear) = match rule {
        CombineRule::Union => (Node::Max(nodes), joint, "union: pointwise maximum", false),
        CombineRule::SumOrthogonal => {
            let both_linear = a.linear && b.linear && joint == Certificate::Exact;
            let certificate = if both_linear {
                Certificate::Exact
            } else if matches!(joint, Certificate::Exact | Certificate::UpperBound) {
                Certificate::UpperBound
            } else {
                Certificate::Indeterminate
            };
            let provenance = if both_linear {
                "orthogonal sum of linear spaces"
            } else {
                "orthogonal sum: upper bound"
            };
            (Node::Sum(nodes), certificate, provenance, both_linear)
        }
        CombineRule::ProductIndependent | CombineRule::TensorProduct => {
            if !disjoint(&nodes) {
                return Err(Error::InvalidArgument(
                    "product rules need functions of disjoint mode groups".into(),
                ));
            }
            let tensor = rule == CombineRule::TensorProduct;
            if tensor && !(a.linear && b.linear) {
                return Err(Error::Precondition("tensor product rule needs linear spaces".into()));
            }
            let provenance = if tensor {
                "tensor product of linear spaces"
            } else {
                "product of independent classes"
            };
            (Node::Product(nodes), joint, provenance, tensor)
        }
    };
    Ok(VariationFn::new(node, a.num_modes, certificate, provenance, linear))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariationNormReport {
    /// max over the grid of w·𝕂; a lower bound of ‖w𝕂‖_∞.
    pub sup_norm: f64,
    /// ∫𝕂 dρ.
    pub l1_norm: f64,
    pub argmax: Vec<f64>,
    pub grid_points: usize,
}

pub fn variation_norms(
    k: &VariationFn,
    weight: &WeightFunction,
    grid: &Grid,
    exec: Exec,
) -> Result<VariationNormReport> {
    let values = k.eval_many(grid, exec)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in values.iter().enumerate() {
        let s = weight.value(grid.point(i))? * v;
        if s > best.0 {
            best = (s, i);
        }
    }
    Ok(VariationNormReport {
        sup_norm: best.0,
        l1_norm: k.integrate()?,
        argmax: grid.point(best.1).to_vec(),
        grid_points: grid.len(),
    })
}

/// The weight w = ‖𝕂‖_{L¹}/𝕂, which makes w·𝕂 constant.
pub fn optimal_weight(k: Arc<VariationFn>, domain: &Domain) -> Result<WeightFunction> {
    WeightFunction::from_variation(k, domain)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzReport {
    /// ‖sup U − sup V‖ in the grid √w-seminorm.
    pub sup_distance: f64,
    /// Hausdorff distance of U and V in the same seminorm.
    pub hausdorff: f64,
    pub holds: bool,
}

/// Checks ‖sup U − sup V‖ ≤ d_H(U, V) for two finite function sets on a grid.
pub fn lipschitz_sup_check(
    u: &[CoeffTensor],
    v: &[CoeffTensor],
    weight: &WeightFunction,
    grid: &Grid,
) -> Result<LipschitzReport> {
    if u.is_empty() || v.is_empty() {
        return Err(Error::InvalidArgument("function sets must be nonempty".into()));
    }
    let sqrt_w = grid
        .iter()
        .map(|y| weight.value(y).map(f64::sqrt))
        .collect::<Result<Vec<_>>>()?;
    let values = |set: &[CoeffTensor]| -> Result<Vec<Vec<f64>>> {
        set.iter()
            .map(|c| {
                let basis = TensorBasis::legendre(&c.dims());
                let table = basis.table(grid.as_flat())?;
                let mut scratch = Vec::new();
                Ok((0..grid.len())
                    .map(|i| c.eval_view(table.point(i), &mut scratch))
                    .collect())
            })
            .collect()
    };
    let fu = values(u)?;
    let fv = values(v)?;
    let seminorm = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(&sqrt_w)
            .map(|((x, y), s)| s * (x - y).abs())
            .fold(0.0, f64::max)
    };
    let pointwise_sup = |f: &[Vec<f64>]| -> Vec<f64> {
        (0..grid.len())
            .map(|i| f.iter().map(|row| row[i]).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    };
    let directed = |a: &[Vec<f64>], b: &[Vec<f64>]| -> f64 {
        a.iter()
            .map(|x| b.iter().map(|y| seminorm(x, y)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    let sup_distance = seminorm(&pointwise_sup(&fu), &pointwise_sup(&fv));
    let hausdorff = directed(&fu, &fv).max(directed(&fv, &fu));
    Ok(LipschitzReport {
        sup_distance,
        hausdorff,
        holds: sup_distance <= hausdorff,
    })
}

/// Writes `y_1,…,y_M,K_value,certificate` rows for every grid point.
pub fn write_csv<W: Write>(k: &VariationFn, grid: &Grid, exec: Exec, mut out: W) -> Result<()> {
    let values = k.eval_many(grid, exec)?;
    let io = |e: std::io::Error| Error::Construction(format!("write failed: {e}"));
    let header: Vec<String> = (1..=grid.num_modes())
        .map(|m| format!("y_{m}"))
        .chain(["K_value".to_string(), "certificate".to_string()])
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    let label = k.certificate().label();
    for (y, v) in grid.iter().zip(&values) {
        let mut line = String::new();
        for c in y {
            line.push_str(&format!("{c},"));
        }
        line.push_str(&format!("{v},{label}"));
        writeln!(out, "{line}").map_err(io)?;
    }
    Ok(())
}
