//! Best rank-1 approximation of order-M tensors by higher-order power
//! iteration (cyclic factor updates) with several starts.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::{dot, CoeffTensor};

pub const MAX_ITERS: usize = 200;
pub const REL_TOL: f64 = 1e-12;
pub const RANDOM_RESTARTS: usize = 3;

/// Tensors that can be contracted against vectors in all modes but one.
pub trait Multilinear {
    fn dims(&self) -> Vec<usize>;
    fn norm_sq(&self) -> f64;
    /// Contraction with `xs[m]` on every mode `m != skip`.
    fn contract_except(&self, skip: usize, xs: &[Vec<f64>]) -> Vec<f64>;
    /// X_(m) X_(m)ᵀ of the mode-`m` unfolding.
    fn unfolding_gram(&self, mode: usize) -> DMatrix<f64>;
}

/// Borrowed dense tensor, row-major with the last mode fastest.
#[derive(Clone, Copy, Debug)]
pub struct DenseView<'a> {
    pub dims: &'a [usize],
    pub data: &'a [f64],
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for m in (0..dims.len().saturating_sub(1)).rev() {
        s[m] = s[m + 1] * dims[m + 1];
    }
    s
}

impl Multilinear for DenseView<'_> {
    fn dims(&self) -> Vec<usize> {
        self.dims.to_vec()
    }

    fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    fn contract_except(&self, skip: usize, xs: &[Vec<f64>]) -> Vec<f64> {
        // contract trailing modes first, then leading ones, keeping `skip`
        let m = self.dims.len();
        let mut cur = self.data.to_vec();
        let mut shape = self.dims.to_vec();
        for mode in (0..m).rev() {
            if mode == skip {
                continue;
            }
            let d = shape[mode];
            let inner: usize = shape[mode + 1..].iter().product();
            let outer: usize = shape[..mode].iter().product();
            let mut next = vec![0.0; outer * inner];
            for o in 0..outer {
                for k in 0..d {
                    let w = xs[mode][k];
                    let src = &cur[(o * d + k) * inner..(o * d + k + 1) * inner];
                    let dst = &mut next[o * inner..(o + 1) * inner];
                    for (a, b) in dst.iter_mut().zip(src) {
                        *a += w * b;
                    }
                }
            }
            cur = next;
            shape[mode] = 1;
        }
        cur
    }

    fn unfolding_gram(&self, mode: usize) -> DMatrix<f64> {
        let d = self.dims[mode];
        let st = strides(self.dims);
        let inner = st[mode];
        let outer: usize = self.dims[..mode].iter().product();
        let mut g = DMatrix::zeros(d, d);
        for o in 0..outer {
            for i in 0..inner {
                let base = o * d * inner + i;
                for a in 0..d {
                    let xa = self.data[base + a * inner];
                    if xa == 0.0 {
                        continue;
                    }
                    for b in 0..d {
                        g[(a, b)] += xa * self.data[base + b * inner];
                    }
                }
            }
        }
        g
    }
}

/// Σ_j λ_j ⊗_m a_{j,m}, kept in factored form.
#[derive(Clone, Debug, Default)]
pub struct CpTensor {
    pub weights: Vec<f64>,
    /// `terms[j][m]` is the mode-m factor of term j.
    pub terms: Vec<Vec<Vec<f64>>>,
}

impl CpTensor {
    pub fn push(&mut self, weight: f64, factors: Vec<Vec<f64>>) {
        self.weights.push(weight);
        self.terms.push(factors);
    }

    pub fn to_dense_data(&self, dims: &[usize]) -> Vec<f64> {
        let total: usize = dims.iter().product();
        let mut out = vec![0.0; total];
        for (w, f) in self.weights.iter().zip(&self.terms) {
            let t = CoeffTensor::Rank1 { factors: f.clone() }.to_dense_data();
            for (o, x) in out.iter_mut().zip(t) {
                *o += w * x;
            }
        }
        out
    }

    /// Pairwise inner products Π_m ⟨a_{j,m}, a_{l,m}⟩ restricted to modes ≠ skip.
    fn cross(&self, j: usize, l: usize, skip: Option<usize>) -> f64 {
        self.terms[j]
            .iter()
            .zip(&self.terms[l])
            .enumerate()
            .filter(|(m, _)| Some(*m) != skip)
            .map(|(_, (a, b))| dot(a, b))
            .product()
    }
}

impl Multilinear for CpTensor {
    fn dims(&self) -> Vec<usize> {
        self.terms[0].iter().map(Vec::len).collect()
    }

    fn norm_sq(&self) -> f64 {
        let n = self.terms.len();
        let mut s = 0.0;
        for j in 0..n {
            for l in 0..n {
                s += self.weights[j] * self.weights[l] * self.cross(j, l, None);
            }
        }
        s.max(0.0)
    }

    fn contract_except(&self, skip: usize, xs: &[Vec<f64>]) -> Vec<f64> {
        let d = self.terms[0][skip].len();
        let mut out = vec![0.0; d];
        for (w, f) in self.weights.iter().zip(&self.terms) {
            let mut c = *w;
            for (m, a) in f.iter().enumerate() {
                if m != skip {
                    c *= dot(a, &xs[m]);
                }
            }
            for (o, a) in out.iter_mut().zip(&f[skip]) {
                *o += c * a;
            }
        }
        out
    }

    fn unfolding_gram(&self, mode: usize) -> DMatrix<f64> {
        let d = self.terms[0][mode].len();
        let n = self.terms.len();
        let mut g = DMatrix::zeros(d, d);
        for j in 0..n {
            for l in 0..n {
                let c = self.weights[j] * self.weights[l] * self.cross(j, l, Some(mode));
                let a = &self.terms[j][mode];
                let b = &self.terms[l][mode];
                for p in 0..d {
                    for q in 0..d {
                        g[(p, q)] += c * a[p] * b[q];
                    }
                }
            }
        }
        g
    }
}

/// Result of a rank-1 fit: `scale · ⊗ factors` with unit factors.
#[derive(Clone, Debug)]
pub struct Rank1Fit {
    pub scale: f64,
    pub factors: Vec<Vec<f64>>,
    /// ‖T − fit‖².
    pub residual_sq: f64,
}

impl Rank1Fit {
    pub fn to_tensor(&self) -> CoeffTensor {
        let mut factors = self.factors.clone();
        for x in factors[0].iter_mut() {
            *x *= self.scale;
        }
        CoeffTensor::Rank1 { factors }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn leading_eigenvector(g: DMatrix<f64>) -> Vec<f64> {
    let d = g.nrows();
    let eig = SymmetricEigen::new(g);
    let mut best = 0;
    for i in 1..d {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    eig.eigenvectors.column(best).iter().copied().collect()
}

/// Power iteration from one start; returns (σ, unit factors).
fn power_iterate<T: Multilinear + ?Sized>(t: &T, mut xs: Vec<Vec<f64>>) -> (f64, Vec<Vec<f64>>) {
    let m = xs.len();
    for x in xs.iter_mut() {
        normalize(x);
    }
    let mut sigma = 0.0;
    for _ in 0..MAX_ITERS {
        let prev = sigma;
        for mode in 0..m {
            let mut y = t.contract_except(mode, &xs);
            sigma = normalize(&mut y);
            if sigma == 0.0 {
                return (0.0, xs);
            }
            xs[mode] = y;
        }
        if (sigma - prev).abs() <= REL_TOL * sigma {
            break;
        }
    }
    (sigma, xs)
}

/// Best rank-1 approximation by power iteration from an HOSVD start, the
/// optional `warm` start and [`RANDOM_RESTARTS`] random starts, keeping the
/// largest σ.
pub fn best_rank1<T: Multilinear + ?Sized>(t: &T, warm: Option<&[Vec<f64>]>, seed: u64) -> Rank1Fit {
    let dims = t.dims();
    let norm_sq = t.norm_sq();
    let zero = || Rank1Fit {
        scale: 0.0,
        factors: dims
            .iter()
            .map(|&d| {
                let mut e = vec![0.0; d];
                e[0] = 1.0;
                e
            })
            .collect(),
        residual_sq: norm_sq,
    };
    if norm_sq == 0.0 {
        return zero();
    }
    if dims.len() == 1 {
        let mut x = t.contract_except(0, &[vec![]]);
        let s = normalize(&mut x);
        return Rank1Fit {
            scale: s,
            factors: vec![x],
            residual_sq: 0.0,
        };
    }
    let mut starts: Vec<Vec<Vec<f64>>> = Vec::new();
    starts.push(
        (0..dims.len())
            .map(|m| leading_eigenvector(t.unfolding_gram(m)))
            .collect(),
    );
    if let Some(w) = warm {
        starts.push(w.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_RESTARTS {
        starts.push(
            dims.iter()
                .map(|&d| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect(),
        );
    }
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for s in starts {
        let (sigma, xs) = power_iterate(t, s);
        if best.as_ref().is_none_or(|(b, _)| sigma > *b) {
            best = Some((sigma, xs));
        }
    }
    let (sigma, factors) = best.unwrap();
    if sigma == 0.0 {
        return zero();
    }
    Rank1Fit {
        scale: sigma,
        factors,
        residual_sq: (norm_sq - sigma * sigma).max(0.0),
    }
}

/// Power iteration from `start` alone; a cheap local update when a good
/// initial guess is known. Falls back to [`best_rank1`] when `start` vanishes.
pub fn refine_rank1<T: Multilinear + ?Sized>(t: &T, start: &[Vec<f64>], seed: u64) -> Rank1Fit {
    let norm_sq = t.norm_sq();
    if norm_sq == 0.0 || t.dims().len() == 1 || start.iter().any(|f| f.iter().all(|&x| x == 0.0)) {
        return best_rank1(t, Some(start), seed);
    }
    let (sigma, factors) = power_iterate(t, start.to_vec());
    if sigma == 0.0 {
        return best_rank1(t, Some(start), seed);
    }
    Rank1Fit {
        scale: sigma,
        factors,
        residual_sq: (norm_sq - sigma * sigma).max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_rank1() {
        let f = vec![vec![1.0, 2.0, -1.0], vec![0.5, 0.5], vec![3.0, 0.0, 1.0, 1.0]];
        let t = CoeffTensor::Rank1 { factors: f.clone() };
        let data = t.to_dense_data();
        let dims = t.dims();
        let fit = best_rank1(
            &DenseView {
                dims: &dims,
                data: &data,
            },
            None,
            1,
        );
        assert!(fit.residual_sq < 1e-20);
        assert!((fit.scale - t.norm()).abs() < 1e-12);
        let back = fit.to_tensor().to_dense_data();
        for (a, b) in back.iter().zip(&data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cp_and_dense_contractions_agree() {
        let mut cp = CpTensor::default();
        cp.push(1.5, vec![vec![1.0, 2.0], vec![0.0, 1.0, -1.0], vec![2.0, 1.0]]);
        cp.push(-0.5, vec![vec![0.3, -1.0], vec![1.0, 1.0, 1.0], vec![0.0, 1.0]]);
        let dims = cp.dims();
        let data = cp.to_dense_data(&dims);
        let dv = DenseView {
            dims: &dims,
            data: &data,
        };
        let xs = vec![vec![0.2, -0.7], vec![1.0, 0.5, 0.25], vec![-1.0, 2.0]];
        for skip in 0..3 {
            let a = cp.contract_except(skip, &xs);
            let b = dv.contract_except(skip, &xs);
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() < 1e-12);
            }
            assert!((cp.unfolding_gram(skip) - dv.unfolding_gram(skip)).norm() < 1e-12);
        }
        assert!((cp.norm_sq() - dv.norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn matrix_case_matches_svd() {
        let data = [4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let dims = [3, 3];
        let fit = best_rank1(
            &DenseView {
                dims: &dims,
                data: &data,
            },
            None,
            7,
        );
        let s = super::super::lowrank::singular_values(&DMatrix::from_row_slice(3, 3, &data));
        assert!((fit.scale - s[0]).abs() < 1e-10);
    }
}
