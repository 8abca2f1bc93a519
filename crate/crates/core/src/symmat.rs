//! Dense symmetric matrices stored as the lower triangle, row major.
//! This packed form is also the on-disk layout in representation files.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMat {
    dim: usize,
    /// Row-major lower triangle: entry (i, j) with i >= j lives at
    /// i * (i + 1) / 2 + j. Length is dim * (dim + 1) / 2.
    lower: Vec<f64>,
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        SymMat {
            dim,
            lower: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_lower(dim: usize, lower: Vec<f64>) -> Result<Self> {
        if lower.len() != dim * (dim + 1) / 2 {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix of dim {dim} needs {} packed entries, got {}",
                dim * (dim + 1) / 2,
                lower.len()
            )));
        }
        Ok(SymMat { dim, lower })
    }

    /// Symmetrizes a dense matrix: off-diagonal entries are averaged.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let dim = m.nrows();
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                out.set(i, j, 0.5 * (m[(i, j)] + m[(j, i)]));
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    #[inline]
    fn idx(i: usize, j: usize) -> usize {
        if i >= j {
            i * (i + 1) / 2 + j
        } else {
            j * (j + 1) / 2 + i
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[Self::idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.lower[Self::idx(i, j)] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.lower[Self::idx(i, j)] += v;
    }

    /// self += s * other
    pub fn axpy(&mut self, s: f64, other: &SymMat) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.lower.iter_mut().zip(&other.lower) {
            *a += s * b;
        }
    }

    pub fn scale(&self, s: f64) -> SymMat {
        SymMat {
            dim: self.dim,
            lower: self.lower.iter().map(|v| v * s).collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn is_zero(&self) -> bool {
        self.lower.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.lower.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..=i {
                let v = self.get(i, j);
                s += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        s.sqrt()
    }

    /// Smallest eigenvalue via symmetric eigendecomposition.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim == 0 {
            return f64::INFINITY;
        }
        let eig = self.to_dense().symmetric_eigenvalues();
        eig.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_indexing_round_trips_through_dense() {
        let mut m = SymMat::zeros(3);
        m.set(0, 0, 1.0);
        m.set(1, 0, 2.0);
        m.set(2, 1, -3.0);
        m.set(2, 2, 4.0);
        assert_eq!(m.get(0, 1), 2.0, "symmetric access");
        let d = m.to_dense();
        assert_eq!(d[(0, 1)], 2.0);
        assert_eq!(d[(1, 2)], -3.0);
        let back = SymMat::from_dense(&d);
        assert_eq!(back, m);
    }

    #[test]
    fn from_lower_validates_length() {
        assert!(SymMat::from_lower(3, vec![0.0; 6]).is_ok());
        assert!(SymMat::from_lower(3, vec![0.0; 5]).is_err());
    }

    #[test]
    fn min_eigenvalue_matches_known_spectrum() {
        // [[2, 1], [1, 2]] has eigenvalues {1, 3}.
        let mut m = SymMat::zeros(2);
        m.set(0, 0, 2.0);
        m.set(1, 1, 2.0);
        m.set(1, 0, 1.0);
        assert!((m.min_eigenvalue() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn serde_uses_lower_triangle_layout() {
        let mut m = SymMat::zeros(2);
        m.set(0, 0, 1.0);
        m.set(1, 0, 5.0);
        m.set(1, 1, 2.0);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"dim":2,"lower":[1.0,5.0,2.0]}"#);
        let back: SymMat = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
