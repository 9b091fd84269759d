//! Dense matrices, boolean support masks and the matrix norms used throughout
//! the crate.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Real dense matrix. Every public operation rejects non-finite entries.
pub type DenseMatrix = DMatrix<f64>;

/// Which matrix norm to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatrixNormKind {
    /// Maximum absolute column sum.
    One,
    /// Largest singular value.
    Two,
    /// Maximum absolute row sum.
    Infinity,
    /// Largest entry magnitude. Not submultiplicative.
    Max,
}

pub(crate) fn ensure_finite(m: &DenseMatrix, name: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}

pub(crate) fn ensure_square(m: &DenseMatrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

pub fn matrix_norm(m: &DenseMatrix, kind: MatrixNormKind) -> Result<f64> {
    ensure_finite(m, "M")?;
    Ok(norm_unchecked(m, kind))
}

pub(crate) fn norm_unchecked(m: &DenseMatrix, kind: MatrixNormKind) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    match kind {
        MatrixNormKind::One => m
            .column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        MatrixNormKind::Infinity => m
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        MatrixNormKind::Max => m.iter().fold(0.0, |acc, v| acc.max(v.abs())),
        MatrixNormKind::Two => m.singular_values().iter().copied().fold(0.0, f64::max),
    }
}

/// Boolean sparsity pattern with the same shape as the matrix it describes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportMask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl SupportMask {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![true; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::empty(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                bits.push(f(i, j));
            }
        }
        Self { rows, cols, bits }
    }

    /// Entries strictly larger than `zero_tol` in magnitude.
    pub fn of_matrix(m: &DenseMatrix, zero_tol: f64) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].abs() > zero_tol)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.bits[i * self.cols + j] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn union(&self, other: &SupportMask) -> Result<SupportMask> {
        self.same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| *a || *b)
                .collect(),
        })
    }

    /// Structural product: `(i, j)` is set iff some `k` has both `self(i, k)`
    /// and `other(k, j)` set.
    pub fn bool_product(&self, other: &SupportMask) -> Result<SupportMask> {
        if self.cols != other.rows {
            return Err(Error::dims(format!(
                "mask product {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).any(|k| self.get(i, k) && other.get(k, j))
        }))
    }

    pub fn transpose(&self) -> SupportMask {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn is_subset_of(&self, other: &SupportMask) -> bool {
        self.shape() == other.shape() && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Hadamard product with the 0/1 matrix this mask represents.
    pub fn apply(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if m.shape() != self.shape() {
            return Err(Error::dims(format!(
                "mask {}x{} applied to matrix {}x{}",
                self.rows,
                self.cols,
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(DenseMatrix::from_fn(self.rows, self.cols, |i, j| {
            if self.get(i, j) {
                m[(i, j)]
            } else {
                0.0
            }
        }))
    }

    fn same_shape(&self, other: &SupportMask) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::dims(format!(
                "mask shapes {:?} and {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn norms_of_small_example() {
        let m = dmatrix![1.0, -2.0; 3.0, 4.0];
        assert_eq!(matrix_norm(&m, MatrixNormKind::One).unwrap(), 6.0);
        assert_eq!(matrix_norm(&m, MatrixNormKind::Infinity).unwrap(), 7.0);
        assert_eq!(matrix_norm(&m, MatrixNormKind::Max).unwrap(), 4.0);
    }

    #[test]
    fn identity_has_unit_norm_in_every_kind() {
        let eye = DenseMatrix::identity(5, 5);
        for kind in [
            MatrixNormKind::One,
            MatrixNormKind::Two,
            MatrixNormKind::Infinity,
            MatrixNormKind::Max,
        ] {
            assert!((matrix_norm(&eye, kind).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_norm_of_diagonal() {
        let m = DenseMatrix::from_diagonal(&nalgebra::dvector![3.0, -5.0]);
        assert!((matrix_norm(&m, MatrixNormKind::Two).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn two_norm_when_top_singular_vector_is_orthogonal_to_ones() {
        // Power iteration from the all-ones vector returns 0 here.
        let m = dmatrix![1.0, -1.0; -1.0, 1.0];
        assert!((matrix_norm(&m, MatrixNormKind::Two).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_nan() {
        let m = dmatrix![1.0, f64::NAN];
        assert_eq!(
            matrix_norm(&m, MatrixNormKind::One),
            Err(Error::NonFinite("M"))
        );
    }

    #[test]
    fn mask_product_is_structural() {
        // Numeric product would cancel to zero in (0, 0).
        let a = SupportMask::full(1, 2);
        let b = SupportMask::full(2, 1);
        assert!(a.bool_product(&b).unwrap().get(0, 0));
    }
}
