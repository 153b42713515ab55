//! Expression trees for variation functions. Every node reads the global
//! point `y` and uses only the coordinates of its own modes.

use std::fmt;
use std::sync::Arc;

use crate::basis::{dot, legendre_values, CoeffTensor, TensorBasis};
use crate::model::knapsack::Knapsack;

pub type PointFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub(crate) enum Node {
    /// Σ_{k<dim} b_k(y_mode)².
    Univariate {
        mode: usize,
        dim: usize,
    },
    /// Σ_j ⟨v_j, b(y_mode)⟩² for orthonormal vectors v_j in ℝ^dim.
    UnivariateFrame {
        mode: usize,
        dim: usize,
        vectors: Vec<Vec<f64>>,
    },
    /// Σ over multi-indices of Π_m b_{k_m}(y_{modes[m]})².
    IndexSpan {
        modes: Vec<usize>,
        dims: Vec<usize>,
        indices: Vec<Vec<usize>>,
    },
    /// Σ_j e_j(y)² for an orthonormal frame of coefficient tensors.
    Frame {
        modes: Vec<usize>,
        basis: TensorBasis,
        elements: Arc<Vec<CoeffTensor>>,
    },
    /// max_j e_j(y)² over unit elements.
    Sampled {
        modes: Vec<usize>,
        basis: TensorBasis,
        elements: Arc<Vec<CoeffTensor>>,
    },
    /// max over admissible supports S of Σ_{k∈S} B_k(y)².
    Sparse {
        modes: Vec<usize>,
        basis: TensorBasis,
        knapsack: Arc<Knapsack>,
    },
    Sum(Vec<Node>),
    Product(Vec<Node>),
    Max(Vec<Node>),
    /// (√a + c·√b)².
    LocalBound {
        tangent: Box<Node>,
        normal: Box<Node>,
        c: f64,
    },
    Custom {
        modes: Vec<usize>,
        f: Arc<PointFn>,
    },
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Univariate { mode, dim } => write!(f, "Univariate(y{mode}, d={dim})"),
            Node::UnivariateFrame { mode, vectors, .. } => write!(f, "UnivariateFrame(y{mode}, {})", vectors.len()),
            Node::IndexSpan { modes, indices, .. } => write!(f, "IndexSpan({modes:?}, {})", indices.len()),
            Node::Frame { modes, elements, .. } => write!(f, "Frame({modes:?}, {})", elements.len()),
            Node::Sampled { modes, elements, .. } => write!(f, "Sampled({modes:?}, {})", elements.len()),
            Node::Sparse { modes, .. } => write!(f, "Sparse({modes:?})"),
            Node::Sum(c) => f.debug_tuple("Sum").field(c).finish(),
            Node::Product(c) => f.debug_tuple("Product").field(c).finish(),
            Node::Max(c) => f.debug_tuple("Max").field(c).finish(),
            Node::LocalBound { tangent, normal, c } => f
                .debug_struct("LocalBound")
                .field("tangent", tangent)
                .field("normal", normal)
                .field("c", c)
                .finish(),
            Node::Custom { modes, .. } => write!(f, "Custom({modes:?})"),
        }
    }
}

fn sub_point(y: &[f64], modes: &[usize]) -> Vec<f64> {
    modes.iter().map(|&m| y[m]).collect()
}

impl Node {
    /// Sorted global modes the node depends on.
    pub fn modes(&self) -> Vec<usize> {
        let mut out = match self {
            Node::Univariate { mode, .. } | Node::UnivariateFrame { mode, .. } => vec![*mode],
            Node::IndexSpan { modes, .. }
            | Node::Frame { modes, .. }
            | Node::Sampled { modes, .. }
            | Node::Sparse { modes, .. }
            | Node::Custom { modes, .. } => modes.clone(),
            Node::Sum(c) | Node::Product(c) | Node::Max(c) => c.iter().flat_map(Node::modes).collect(),
            Node::LocalBound { tangent, normal, .. } => {
                let mut m = tangent.modes();
                m.extend(normal.modes());
                m
            }
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Renames mode `m` to `map[m]`.
    pub fn remap(&self, map: &[usize]) -> Node {
        let r = |ms: &[usize]| ms.iter().map(|&m| map[m]).collect::<Vec<_>>();
        match self {
            Node::Univariate { mode, dim } => Node::Univariate {
                mode: map[*mode],
                dim: *dim,
            },
            Node::UnivariateFrame { mode, dim, vectors } => Node::UnivariateFrame {
                mode: map[*mode],
                dim: *dim,
                vectors: vectors.clone(),
            },
            Node::IndexSpan { modes, dims, indices } => Node::IndexSpan {
                modes: r(modes),
                dims: dims.clone(),
                indices: indices.clone(),
            },
            Node::Frame { modes, basis, elements } => Node::Frame {
                modes: r(modes),
                basis: basis.clone(),
                elements: elements.clone(),
            },
            Node::Sampled { modes, basis, elements } => Node::Sampled {
                modes: r(modes),
                basis: basis.clone(),
                elements: elements.clone(),
            },
            Node::Sparse { modes, basis, knapsack } => Node::Sparse {
                modes: r(modes),
                basis: basis.clone(),
                knapsack: knapsack.clone(),
            },
            Node::Sum(c) => Node::Sum(c.iter().map(|n| n.remap(map)).collect()),
            Node::Product(c) => Node::Product(c.iter().map(|n| n.remap(map)).collect()),
            Node::Max(c) => Node::Max(c.iter().map(|n| n.remap(map)).collect()),
            Node::LocalBound { tangent, normal, c } => Node::LocalBound {
                tangent: Box::new(tangent.remap(map)),
                normal: Box::new(normal.remap(map)),
                c: *c,
            },
            Node::Custom { modes, f } => {
                // the closure reads the old coordinates; re-gather them
                let old = modes.clone();
                let new = r(modes);
                let width = old.iter().max().map_or(0, |m| m + 1);
                let f = f.clone();
                let pairs: Vec<(usize, usize)> = old.iter().copied().zip(new.iter().copied()).collect();
                Node::Custom {
                    modes: new,
                    f: Arc::new(move |y: &[f64]| {
                        let mut z = vec![0.0; width];
                        for &(o, n) in &pairs {
                            z[o] = y[n];
                        }
                        f(&z)
                    }),
                }
            }
        }
    }

    /// Value at a validated point.
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            Node::Univariate { mode, dim } => {
                let mut v = vec![0.0; *dim];
                legendre_values(y[*mode], &mut v);
                v.iter().map(|x| x * x).sum()
            }
            Node::UnivariateFrame { mode, dim, vectors } => {
                let mut v = vec![0.0; *dim];
                legendre_values(y[*mode], &mut v);
                vectors.iter().map(|f| dot(f, &v).powi(2)).sum()
            }
            Node::IndexSpan { modes, dims, indices } => {
                let vals: Vec<Vec<f64>> = modes
                    .iter()
                    .zip(dims)
                    .map(|(&m, &d)| {
                        let mut v = vec![0.0; d];
                        legendre_values(y[m], &mut v);
                        v
                    })
                    .collect();
                indices
                    .iter()
                    .map(|idx| {
                        idx.iter()
                            .enumerate()
                            .map(|(m, &k)| vals[m][k] * vals[m][k])
                            .product::<f64>()
                    })
                    .sum()
            }
            Node::Frame { modes, basis, elements } | Node::Sampled { modes, basis, elements } => {
                let values = basis.values_at(&sub_point(y, modes)).expect("validated point");
                let view = values.view();
                let mut scratch = Vec::new();
                let sq = elements.iter().map(|e| e.eval_view(view, &mut scratch).powi(2));
                if matches!(self, Node::Frame { .. }) {
                    sq.sum()
                } else {
                    sq.fold(0.0, f64::max)
                }
            }
            Node::Sparse { modes, basis, knapsack } => {
                let values = basis.values_at(&sub_point(y, modes)).expect("validated point");
                let view = values.view();
                let mut prod = vec![1.0];
                for m in 0..modes.len() {
                    let phi = view.mode(m);
                    prod = prod.iter().flat_map(|&a| phi.iter().map(move |&b| a * b * b)).collect();
                }
                knapsack.solve(&prod).value
            }
            Node::Sum(c) => c.iter().map(|n| n.eval(y)).sum(),
            Node::Product(c) => c.iter().map(|n| n.eval(y)).product(),
            Node::Max(c) => c.iter().map(|n| n.eval(y)).fold(0.0, f64::max),
            Node::LocalBound { tangent, normal, c } => {
                let a = tangent.eval(y).max(0.0).sqrt();
                let b = normal.eval(y).max(0.0).sqrt();
                (a + c * b).powi(2)
            }
            Node::Custom { f, .. } => f(y),
        }
    }
}
