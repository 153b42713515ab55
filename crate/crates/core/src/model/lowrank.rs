//! Low-rank matrix helpers: truncated SVD and the tangent space of the
//! fixed-rank manifold.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::basis::CoeffTensor;
use crate::error::{Error, Result};

/// Singular values below this are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Thin SVD with singular values sorted in descending order.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd(m: &DMatrix<f64>) -> SortedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_columns(&order.iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>());
    let v = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| v_t.row(i).transpose().into_owned())
            .collect::<Vec<_>>(),
    );
    SortedSvd { u, sigma, v }
}

/// Sorted singular values only.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Best rank-`rank` approximation and a flag set when σ_rank ties σ_{rank+1}.
pub fn truncate(m: &DMatrix<f64>, rank: usize) -> (DMatrix<f64>, bool) {
    let s = svd(m);
    let k = rank.min(s.sigma.len());
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..k {
        out += s.sigma[j] * s.u.column(j) * s.v.column(j).transpose();
    }
    let tied = s.sigma.len() > k && k > 0 && s.sigma[k] > RANK_TOL && (s.sigma[k - 1] - s.sigma[k]).abs() < RANK_TOL;
    (out, tied)
}

/// Orthonormal basis of the orthogonal complement of the columns of `w`
/// (which must be orthonormal).
pub fn complement(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    let projector = DMatrix::identity(n, n) - w * w.transpose();
    let eig = SymmetricEigen::new(projector);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > 0.5)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Tangent space 𝕋_v at a rank-R matrix v = W_L diag(σ) W_Rᵀ:
/// ⟨W_L⟩ ⊗ ℝ^cols ⊕ ⟨W_L⟩^⊥ ⊗ ⟨W_R⟩.
#[derive(Clone, Debug)]
pub struct TangentSpace {
    pub rank: usize,
    pub sigma: Vec<f64>,
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    pub left_perp: DMatrix<f64>,
    pub right_perp: DMatrix<f64>,
}

impl TangentSpace {
    pub fn at(v: &DMatrix<f64>, rank: usize) -> Result<Self> {
        let (rows, cols) = v.shape();
        if rank == 0 || rank > rows.min(cols) {
            return Err(Error::InvalidArgument(format!(
                "rank {rank} impossible for a {rows}x{cols} matrix"
            )));
        }
        let s = svd(v);
        if s.sigma[rank - 1] < RANK_TOL {
            return Err(Error::RankDeficient {
                rank,
                sigma: s.sigma[rank - 1],
            });
        }
        let left = s.u.columns(0, rank).into_owned();
        let right = s.v.columns(0, rank).into_owned();
        Ok(Self {
            rank,
            sigma: s.sigma,
            left_perp: complement(&left),
            right_perp: complement(&right),
            left,
            right,
        })
    }

    pub fn rows(&self) -> usize {
        self.left.nrows()
    }

    pub fn cols(&self) -> usize {
        self.right.nrows()
    }

    /// R·cols + (rows − R)·R.
    pub fn dimension(&self) -> usize {
        self.rank * self.cols() + (self.rows() - self.rank) * self.rank
    }

    /// Orthonormal frame: first the W_L block, then the W_R block.
    pub fn frame(&self) -> Vec<CoeffTensor> {
        let mut out = Vec::with_capacity(self.dimension());
        for j in 0..self.rank {
            for k in 0..self.cols() {
                let mut e = DVector::zeros(self.cols());
                e[k] = 1.0;
                out.push(CoeffTensor::from_matrix(&(self.left.column(j) * e.transpose())));
            }
        }
        for i in 0..self.left_perp.ncols() {
            for j in 0..self.rank {
                out.push(CoeffTensor::from_matrix(
                    &(self.left_perp.column(i) * self.right.column(j).transpose()),
                ));
            }
        }
        out
    }

    /// Orthonormal frame of the normal space ⟨W_L⟩^⊥ ⊗ ⟨W_R⟩^⊥.
    pub fn normal_frame(&self) -> Vec<CoeffTensor> {
        let mut out = Vec::new();
        for i in 0..self.left_perp.ncols() {
            for j in 0..self.right_perp.ncols() {
                out.push(CoeffTensor::from_matrix(
                    &(self.left_perp.column(i) * self.right_perp.column(j).transpose()),
                ));
            }
        }
        out
    }

    /// Orthogonal projection P_T(X) = UUᵀX + (I − UUᵀ)XVVᵀ.
    pub fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let pu = &self.left * self.left.transpose();
        let pv = &self.right * self.right.transpose();
        let ux = &pu * x;
        &ux + (x - &ux) * pv
    }
}
