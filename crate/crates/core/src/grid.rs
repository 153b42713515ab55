//! Evaluation grids on [-1, 1]^M.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Per-mode points of the standard grid (Chebyshev–Lobatto, includes ±1 and 0).
pub const POINTS_PER_MODE: usize = 129;
/// Tensor grids are used up to this many modes.
pub const MAX_TENSOR_MODES: usize = 3;
/// Random points of the standard grid when M exceeds [`MAX_TENSOR_MODES`].
pub const RANDOM_GRID_POINTS: usize = 10_000;
const RANDOM_GRID_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// A finite list of points in [-1, 1]^M, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    num_modes: usize,
    points: Vec<f64>,
}

impl Grid {
    pub fn from_points(num_modes: usize, points: Vec<f64>) -> Result<Self> {
        if num_modes == 0 || points.is_empty() || !points.len().is_multiple_of(num_modes) {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not form a nonempty grid in {num_modes} modes",
                points.len()
            )));
        }
        if let Some(&bad) = points.iter().find(|c| c.abs() > 1.0 || c.is_nan()) {
            return Err(Error::Domain { value: bad });
        }
        Ok(Self { num_modes, points })
    }

    /// Chebyshev–Lobatto points cos(πj/(n−1)), ascending, with exact 0 and ±1.
    pub fn lobatto_1d(n: usize) -> Vec<f64> {
        assert!(n >= 2);
        let mut pts: Vec<f64> = (0..n)
            .map(|j| -(std::f64::consts::PI * j as f64 / (n - 1) as f64).cos())
            .collect();
        pts[0] = -1.0;
        pts[n - 1] = 1.0;
        if n % 2 == 1 {
            pts[n / 2] = 0.0;
        }
        for j in 0..n / 2 {
            pts[n - 1 - j] = -pts[j];
        }
        pts
    }

    /// Cartesian product of the same 1-D points over `num_modes` modes.
    pub fn tensor(axis: &[f64], num_modes: usize) -> Result<Self> {
        let n = axis.len();
        let total = n.checked_pow(num_modes as u32).ok_or(Error::TooLarge {
            entries: usize::MAX,
            limit: usize::MAX,
        })?;
        let mut points = Vec::with_capacity(total * num_modes);
        for flat in 0..total {
            let mut rem = flat;
            let start = points.len();
            points.resize(start + num_modes, 0.0);
            for m in (0..num_modes).rev() {
                points[start + m] = axis[rem % n];
                rem /= n;
            }
        }
        Self::from_points(num_modes, points)
    }

    /// `n` i.i.d. uniform points.
    pub fn uniform(num_modes: usize, n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n * num_modes).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self::from_points(num_modes, points)
    }

    /// The 2^M corners of the cube.
    pub fn corners(num_modes: usize) -> Result<Self> {
        Self::tensor(&[-1.0, 1.0], num_modes)
    }

    /// Default grid: 129 Lobatto points per mode tensorized for M ≤ 3;
    /// otherwise 10⁴ seeded uniform points plus the 2^M corners, where
    /// Legendre variation functions peak.
    pub fn standard(num_modes: usize) -> Result<Self> {
        if num_modes <= MAX_TENSOR_MODES {
            Self::tensor(&Self::lobatto_1d(POINTS_PER_MODE), num_modes)
        } else {
            let mut g = Self::uniform(num_modes, RANDOM_GRID_POINTS, RANDOM_GRID_SEED)?;
            if num_modes <= 16 {
                g.points.extend(Self::corners(num_modes)?.points);
            }
            Ok(g)
        }
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.num_modes
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.num_modes..(i + 1) * self.num_modes]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.num_modes)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lobatto_contains_endpoints_and_zero() {
        let p = Grid::lobatto_1d(POINTS_PER_MODE);
        assert_eq!(p.len(), 129);
        assert_eq!((p[0], p[64], p[128]), (-1.0, 0.0, 1.0));
        assert!(p.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn standard_grid_sizes() {
        assert_eq!(Grid::standard(1).unwrap().len(), 129);
        assert_eq!(Grid::standard(2).unwrap().len(), 129 * 129);
        let g = Grid::standard(4).unwrap();
        assert_eq!(g.len(), RANDOM_GRID_POINTS + 16);
        assert!(g.iter().any(|p| p.iter().all(|&c| c == 1.0)));
        assert_eq!(g, Grid::standard(4).unwrap());
    }

    #[test]
    fn tensor_order_is_row_major() {
        let g = Grid::tensor(&[-1.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(g.point(0), &[-1.0, -1.0]);
        assert_eq!(g.point(1), &[-1.0, 0.0]);
        assert_eq!(g.point(3), &[0.0, -1.0]);
    }

    #[test]
    fn rejects_bad_points() {
        assert!(Grid::from_points(2, vec![0.0, 1.5]).is_err());
        assert!(Grid::from_points(2, vec![0.0]).is_err());
        assert!(Grid::from_points(1, vec![]).is_err());
    }
}
