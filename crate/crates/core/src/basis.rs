//! Orthonormal Legendre bases on [-1, 1] (w.r.t. dx/2), tensor-product
//! bases and coefficient tensors.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// A univariate basis orthonormal in L²([-1,1], dx/2).
pub trait UnivariateBasis: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    /// Writes b_0(y), …, b_{dim-1}(y) into `out` (length ≥ dim).
    fn eval_into(&self, y: f64, out: &mut [f64]);
    fn name(&self) -> &'static str;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LegendreBasis {
    pub dim: usize,
}

impl UnivariateBasis for LegendreBasis {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, y: f64, out: &mut [f64]) {
        legendre_values(y, &mut out[..self.dim]);
    }

    fn name(&self) -> &'static str {
        "legendre"
    }
}

/// √(2k+1)·P_k(y) for k = 0..out.len(), by the three-term recurrence.
/// No domain check.
pub fn legendre_values(y: f64, out: &mut [f64]) {
    let d = out.len();
    if d == 0 {
        return;
    }
    let mut p0 = 1.0;
    out[0] = 1.0;
    if d == 1 {
        return;
    }
    let mut p1 = y;
    out[1] = 3f64.sqrt() * y;
    for k in 1..d - 1 {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * y * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
        out[k + 1] = (2.0 * kf + 3.0).sqrt() * p2;
    }
}

/// Normalized Legendre polynomial b_k(y) = √(2k+1)·P_k(y).
pub fn eval_legendre(k: usize, y: f64) -> Result<f64> {
    check_point(y)?;
    let mut out = vec![0.0; k + 1];
    legendre_values(y, &mut out);
    Ok(out[k])
}

fn check_point(y: f64) -> Result<()> {
    if y.abs() > 1.0 || y.is_nan() {
        Err(Error::Domain { value: y })
    } else {
        Ok(())
    }
}

/// Tensor product of univariate bases, one per mode.
#[derive(Clone)]
pub struct TensorBasis {
    modes: Vec<Arc<dyn UnivariateBasis>>,
}

impl fmt::Debug for TensorBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TensorBasis").field("dims", &self.dims()).finish()
    }
}

impl PartialEq for TensorBasis {
    fn eq(&self, other: &Self) -> bool {
        self.dims() == other.dims() && self.modes.iter().zip(&other.modes).all(|(a, b)| a.name() == b.name())
    }
}

impl TensorBasis {
    pub fn legendre(dims: &[usize]) -> Self {
        Self {
            modes: dims
                .iter()
                .map(|&dim| Arc::new(LegendreBasis { dim }) as Arc<dyn UnivariateBasis>)
                .collect(),
        }
    }

    pub fn from_modes(modes: Vec<Arc<dyn UnivariateBasis>>) -> Self {
        Self { modes }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.modes.iter().map(|b| b.dim()).collect()
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn total_dim(&self) -> usize {
        self.modes.iter().map(|b| b.dim()).product()
    }

    pub fn mode(&self, m: usize) -> &dyn UnivariateBasis {
        self.modes[m].as_ref()
    }

    /// Per-mode basis values at a single point.
    pub fn values_at(&self, y: &[f64]) -> Result<ModeValues> {
        if y.len() != self.num_modes() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} coordinates", self.num_modes()),
                got: format!("{}", y.len()),
            });
        }
        for &c in y {
            check_point(c)?;
        }
        let offsets = offsets(&self.dims());
        let mut values = vec![0.0; *offsets.last().unwrap()];
        for (m, &c) in y.iter().enumerate() {
            self.modes[m].eval_into(c, &mut values[offsets[m]..offsets[m + 1]]);
        }
        Ok(ModeValues { offsets, values })
    }

    /// Basis values at many points (flat, row-major, `num_modes` per point).
    pub fn table(&self, points: &[f64]) -> Result<BasisTable> {
        let m = self.num_modes();
        if m == 0 || !points.len().is_multiple_of(m) {
            return Err(Error::DimensionMismatch {
                expected: format!("multiple of {m} coordinates"),
                got: format!("{}", points.len()),
            });
        }
        if let Some(&bad) = points.iter().find(|c| c.abs() > 1.0 || c.is_nan()) {
            return Err(Error::Domain { value: bad });
        }
        let offsets = offsets(&self.dims());
        let stride = *offsets.last().unwrap();
        let n = points.len() / m;
        let mut values = vec![0.0; n * stride];
        for (i, row) in values.chunks_mut(stride).enumerate() {
            for mode in 0..m {
                self.modes[mode].eval_into(points[i * m + mode], &mut row[offsets[mode]..offsets[mode + 1]]);
            }
        }
        Ok(BasisTable {
            offsets,
            stride,
            values,
            len: n,
        })
    }
}

fn offsets(dims: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(dims.len() + 1);
    off.push(0);
    for d in dims {
        off.push(off.last().unwrap() + d);
    }
    off
}

/// Basis values of every mode at one point.
#[derive(Clone, Debug)]
pub struct ModeValues {
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl ModeValues {
    pub fn view(&self) -> ModeView<'_> {
        ModeView {
            offsets: &self.offsets,
            values: &self.values,
        }
    }
}

/// Borrowed per-mode basis values at one point.
#[derive(Clone, Copy, Debug)]
pub struct ModeView<'a> {
    offsets: &'a [usize],
    values: &'a [f64],
}

impl<'a> ModeView<'a> {
    #[inline]
    pub fn mode(&self, m: usize) -> &'a [f64] {
        &self.values[self.offsets[m]..self.offsets[m + 1]]
    }

    pub fn num_modes(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// Basis values at a list of points.
#[derive(Clone, Debug)]
pub struct BasisTable {
    offsets: Vec<usize>,
    stride: usize,
    values: Vec<f64>,
    len: usize,
}

impl BasisTable {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn point(&self, i: usize) -> ModeView<'_> {
        ModeView {
            offsets: &self.offsets,
            values: &self.values[i * self.stride..(i + 1) * self.stride],
        }
    }
}

/// Coefficients of a function in a tensor-product basis.
///
/// Dense data is row-major with the last mode varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoeffTensorRepr", into = "CoeffTensorRepr")]
pub enum CoeffTensor {
    Dense { dims: Vec<usize>, data: Vec<f64> },
    Rank1 { factors: Vec<Vec<f64>> },
}

/// Largest rank-1 pair compared entrywise in [`CoeffTensor::distance`].
const DENSE_DISTANCE_LIMIT: usize = 1 << 24;

impl CoeffTensor {
    pub fn dense(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid dims {dims:?}")));
        }
        let total: usize = dims.iter().product();
        if data.len() != total {
            return Err(Error::DimensionMismatch {
                expected: format!("{total} entries"),
                got: format!("{}", data.len()),
            });
        }
        Ok(CoeffTensor::Dense { dims, data })
    }

    pub fn rank1(factors: Vec<Vec<f64>>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|f| f.is_empty()) {
            return Err(Error::InvalidArgument("empty rank-1 factor".into()));
        }
        Ok(CoeffTensor::Rank1 { factors })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        CoeffTensor::Dense {
            dims: dims.to_vec(),
            data: vec![0.0; dims.iter().product()],
        }
    }

    /// Unit coefficient on one multi-index.
    pub fn unit(dims: &[usize], index: &[usize]) -> Result<Self> {
        let flat = flat_index(dims, index)?;
        let mut t = Self::zeros(dims);
        if let CoeffTensor::Dense { data, .. } = &mut t {
            data[flat] = 1.0;
        }
        Ok(t)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        CoeffTensor::Dense { dims: vec![r, c], data }
    }

    pub fn dims(&self) -> Vec<usize> {
        match self {
            CoeffTensor::Dense { dims, .. } => dims.clone(),
            CoeffTensor::Rank1 { factors } => factors.iter().map(Vec::len).collect(),
        }
    }

    pub fn num_modes(&self) -> usize {
        match self {
            CoeffTensor::Dense { dims, .. } => dims.len(),
            CoeffTensor::Rank1 { factors } => factors.len(),
        }
    }

    pub fn total_dim(&self) -> usize {
        self.dims().iter().product()
    }

    /// Dense entries, expanding a rank-1 tensor as an outer product.
    pub fn to_dense_data(&self) -> Vec<f64> {
        match self {
            CoeffTensor::Dense { data, .. } => data.clone(),
            CoeffTensor::Rank1 { factors } => {
                let mut out = vec![1.0];
                for f in factors {
                    let mut next = Vec::with_capacity(out.len() * f.len());
                    for &a in &out {
                        next.extend(f.iter().map(|&b| a * b));
                    }
                    out = next;
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> CoeffTensor {
        CoeffTensor::Dense {
            dims: self.dims(),
            data: self.to_dense_data(),
        }
    }

    /// Mode-0 × rest matrix view (the coefficient matrix when M = 2).
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let dims = self.dims();
        let rows = dims[0];
        let cols = self.total_dim() / rows;
        DMatrix::from_row_slice(rows, cols, &self.to_dense_data())
    }

    pub fn norm_sq(&self) -> f64 {
        match self {
            CoeffTensor::Dense { data, .. } => data.iter().map(|x| x * x).sum(),
            CoeffTensor::Rank1 { factors } => factors.iter().map(|f| f.iter().map(|x| x * x).sum::<f64>()).product(),
        }
    }

    /// Euclidean norm of the coefficients; equals the L²(ρ) norm.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        match self {
            CoeffTensor::Dense { data, .. } => data.iter().all(|x| x.is_finite()),
            CoeffTensor::Rank1 { factors } => factors.iter().flatten().all(|x| x.is_finite()),
        }
    }

    pub fn dot(&self, other: &CoeffTensor) -> Result<f64> {
        self.check_dims(other)?;
        Ok(match (self, other) {
            (CoeffTensor::Rank1 { factors: a }, CoeffTensor::Rank1 { factors: b }) => a
                .iter()
                .zip(b)
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
                .product(),
            _ => {
                let a = self.to_dense_data();
                let b = other.to_dense_data();
                a.iter().zip(&b).map(|(x, y)| x * y).sum()
            }
        })
    }

    pub fn scaled(&self, s: f64) -> CoeffTensor {
        match self {
            CoeffTensor::Dense { dims, data } => CoeffTensor::Dense {
                dims: dims.clone(),
                data: data.iter().map(|x| x * s).collect(),
            },
            CoeffTensor::Rank1 { factors } => {
                let mut factors = factors.clone();
                for x in factors[0].iter_mut() {
                    *x *= s;
                }
                CoeffTensor::Rank1 { factors }
            }
        }
    }

    /// `self + s·other`, dense.
    pub fn add_scaled(&self, s: f64, other: &CoeffTensor) -> Result<CoeffTensor> {
        self.check_dims(other)?;
        let mut data = self.to_dense_data();
        for (x, y) in data.iter_mut().zip(other.to_dense_data()) {
            *x += s * y;
        }
        Ok(CoeffTensor::Dense {
            dims: self.dims(),
            data,
        })
    }

    pub fn sub(&self, other: &CoeffTensor) -> Result<CoeffTensor> {
        self.add_scaled(-1.0, other)
    }

    /// ‖self − other‖ without materializing when both are rank-1.
    pub fn distance(&self, other: &CoeffTensor) -> Result<f64> {
        let d2 = match (self, other) {
            (CoeffTensor::Rank1 { .. }, CoeffTensor::Rank1 { .. }) => {
                let scale = self.norm_sq() + other.norm_sq();
                let gram = scale - 2.0 * self.dot(other)?;
                // the Gram formula cancels for nearby tensors
                if gram < 1e-6 * scale && self.total_dim() <= DENSE_DISTANCE_LIMIT {
                    self.sub(other)?.norm_sq()
                } else {
                    gram
                }
            }
            _ => self.sub(other)?.norm_sq(),
        };
        Ok(d2.max(0.0).sqrt())
    }

    pub fn normalized(&self) -> Option<CoeffTensor> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self.scaled(1.0 / n))
    }

    fn check_dims(&self, other: &CoeffTensor) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", self.dims()),
                got: format!("{:?}", other.dims()),
            });
        }
        Ok(())
    }

    /// Evaluates the represented function at `y`.
    pub fn eval(&self, basis: &TensorBasis, y: &[f64]) -> Result<f64> {
        if basis.dims() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", self.dims()),
                got: format!("basis {:?}", basis.dims()),
            });
        }
        let values = basis.values_at(y)?;
        Ok(self.eval_view(values.view(), &mut Vec::new()))
    }

    /// Evaluation from precomputed basis values. Dense tensors are contracted
    /// one mode at a time starting from the last; rank-1 tensors cost Σ d_m.
    #[inline]
    pub fn eval_view(&self, view: ModeView<'_>, scratch: &mut Vec<f64>) -> f64 {
        match self {
            CoeffTensor::Rank1 { factors } => factors.iter().enumerate().map(|(m, f)| dot(f, view.mode(m))).product(),
            CoeffTensor::Dense { dims, data } => contract_dense(dims, data, view, scratch),
        }
    }
}

fn contract_dense(dims: &[usize], data: &[f64], view: ModeView<'_>, scratch: &mut Vec<f64>) -> f64 {
    let m = dims.len();
    if m == 1 {
        return dot(data, view.mode(0));
    }
    let last = dims[m - 1];
    let outer = data.len() / last;
    scratch.clear();
    let phi = view.mode(m - 1);
    scratch.extend(data.chunks_exact(last).map(|row| dot(row, phi)));
    let mut len = outer;
    for mode in (0..m - 1).rev() {
        let d = dims[mode];
        let phi = view.mode(mode);
        let next = len / d;
        for o in 0..next {
            scratch[o] = dot(&scratch[o * d..(o + 1) * d], phi);
        }
        len = next;
    }
    scratch[0]
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-major flat position of a multi-index.
pub fn flat_index(dims: &[usize], index: &[usize]) -> Result<usize> {
    if dims.len() != index.len() || index.iter().zip(dims).any(|(&k, &d)| k >= d) {
        return Err(Error::DimensionMismatch {
            expected: format!("multi-index within {dims:?}"),
            got: format!("{index:?}"),
        });
    }
    Ok(index.iter().zip(dims).fold(0, |acc, (&k, &d)| acc * d + k))
}

/// Inverse of [`flat_index`].
pub fn multi_index(dims: &[usize], mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for m in (0..dims.len()).rev() {
        idx[m] = flat % dims[m];
        flat /= dims[m];
    }
    idx
}

/// Coefficients c_k = ∫ f·b_k dρ of a univariate function, by Gauss–Legendre
/// quadrature with `quad_nodes` nodes.
pub fn expand_univariate<F: Fn(f64) -> f64>(f: F, d: usize, quad_nodes: usize) -> Result<Vec<f64>> {
    if quad_nodes < d {
        return Err(Error::Precondition(format!(
            "quadrature with {quad_nodes} nodes cannot resolve {d} coefficients"
        )));
    }
    let owned;
    let rule = if quad_nodes == crate::quadrature::DEFAULT_NODES {
        GaussLegendre::standard()
    } else {
        owned = GaussLegendre::new(quad_nodes);
        &owned
    };
    let mut coeffs = vec![0.0; d];
    let mut vals = vec![0.0; d];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        legendre_values(x, &mut vals);
        let fx = f(x);
        for (c, v) in coeffs.iter_mut().zip(&vals) {
            *c += w * fx * v;
        }
    }
    Ok(coeffs)
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum Representation {
    Dense,
    Rank1,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ReprData {
    Flat(Vec<f64>),
    Factors(Vec<Vec<f64>>),
}

/// JSON wire form: `{"dims": [...], "representation": "dense"|"rank1", "data": ...}`
/// where dense data is the flat row-major array and rank-1 data is the list of
/// factor vectors.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffTensorRepr {
    dims: Vec<usize>,
    representation: Representation,
    data: ReprData,
}

impl From<CoeffTensor> for CoeffTensorRepr {
    fn from(t: CoeffTensor) -> Self {
        let dims = t.dims();
        match t {
            CoeffTensor::Dense { data, .. } => CoeffTensorRepr {
                dims,
                representation: Representation::Dense,
                data: ReprData::Flat(data),
            },
            CoeffTensor::Rank1 { factors } => CoeffTensorRepr {
                dims,
                representation: Representation::Rank1,
                data: ReprData::Factors(factors),
            },
        }
    }
}

impl TryFrom<CoeffTensorRepr> for CoeffTensor {
    type Error = Error;

    fn try_from(r: CoeffTensorRepr) -> Result<Self> {
        let t = match (r.representation, r.data) {
            (Representation::Dense, ReprData::Flat(data)) => CoeffTensor::dense(r.dims.clone(), data)?,
            (Representation::Rank1, ReprData::Factors(factors)) => CoeffTensor::rank1(factors)?,
            // an empty array parses as Flat
            (Representation::Rank1, ReprData::Flat(v)) if v.is_empty() => {
                return Err(Error::InvalidArgument("rank-1 tensor without factors".into()))
            }
            (rep, _) => {
                return Err(Error::InvalidArgument(format!(
                    "data layout does not match representation {rep:?}"
                )))
            }
        };
        if t.dims() != r.dims {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", r.dims),
                got: format!("{:?}", t.dims()),
            });
        }
        Ok(t)
    }
}
