use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Smallest frequency grid accepted by [`FirTransfer::hinf_norm_sampled`].
pub const MIN_HINF_GRID: usize = 64;

/// Strictly proper finite impulse response `sum_{k=1}^T G[k] z^{-k}`.
///
/// Components are stored in order, so `components()[0]` is `G[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirTransfer {
    comps: Vec<DenseMatrix>,
}

impl FirTransfer {
    pub fn new(comps: Vec<DenseMatrix>) -> Result<Self> {
        let Some(first) = comps.first() else {
            return Err(Error::param("an FIR transfer needs at least one component"));
        };
        let shape = first.shape();
        if let Some((k, bad)) = comps.iter().enumerate().find(|(_, c)| c.shape() != shape) {
            return Err(Error::dims(format!(
                "component {} is {:?}, expected {:?}",
                k + 1,
                bad.shape(),
                shape
            )));
        }
        Ok(Self { comps })
    }

    pub fn zeros(rows: usize, cols: usize, horizon: usize) -> Self {
        assert!(horizon >= 1, "FIR horizon must be positive");
        Self {
            comps: vec![DenseMatrix::zeros(rows, cols); horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.comps.len()
    }

    pub fn rows(&self) -> usize {
        self.comps[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.comps[0].ncols()
    }

    /// `G[k]`, one-based.
    pub fn component(&self, k: usize) -> &DenseMatrix {
        &self.comps[k - 1]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut DenseMatrix {
        &mut self.comps[k - 1]
    }

    pub fn components(&self) -> &[DenseMatrix] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<DenseMatrix> {
        self.comps
    }

    pub fn transpose(&self) -> Self {
        Self {
            comps: self.comps.iter().map(|c| c.transpose()).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            comps: self.comps.iter().map(|c| c * factor).collect(),
        }
    }

    /// Vertical stack `[self; other]`.
    pub fn stack(&self, other: &FirTransfer) -> Result<Self> {
        if self.cols() != other.cols() || self.horizon() != other.horizon() {
            return Err(Error::dims(format!(
                "cannot stack {}x{} (T={}) on {}x{} (T={})",
                self.rows(),
                self.cols(),
                self.horizon(),
                other.rows(),
                other.cols(),
                other.horizon()
            )));
        }
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| {
                let mut m = DenseMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
                m.view_mut((0, 0), a.shape()).copy_from(a);
                m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
                m
            })
            .collect();
        Ok(Self { comps })
    }

    /// Left multiplication by a constant matrix.
    pub fn premul(&self, m: &DenseMatrix) -> Result<Self> {
        if m.ncols() != self.rows() {
            return Err(Error::dims(format!(
                "{}x{} times FIR of {} rows",
                m.nrows(),
                m.ncols(),
                self.rows()
            )));
        }
        Ok(Self {
            comps: self.comps.iter().map(|c| m * c).collect(),
        })
    }

    pub fn column(&self, j: usize) -> Self {
        Self {
            comps: self.comps.iter().map(|c| c.columns(j, 1).into_owned()).collect(),
        }
    }

    pub fn row(&self, i: usize) -> Self {
        Self {
            comps: self.comps.iter().map(|c| c.rows(i, 1).into_owned()).collect(),
        }
    }

    /// Induced l-infinity gain: largest absolute row sum over all components.
    pub fn l1_norm(&self) -> f64 {
        (0..self.rows())
            .map(|i| {
                self.comps
                    .iter()
                    .map(|c| c.row(i).iter().map(|v| v.abs()).sum::<f64>())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `l1_norm` of the transpose: largest absolute column sum.
    pub fn e1_norm(&self) -> f64 {
        (0..self.cols())
            .map(|j| {
                self.comps
                    .iter()
                    .map(|c| c.column(j).iter().map(|v| v.abs()).sum::<f64>())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Frobenius norm of the impulse response.
    pub fn h2_norm(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// `sum_k G[k] e^{-i k theta}`.
    pub fn frequency_response(&self, theta: f64) -> DMatrix<Complex64> {
        let mut out = DMatrix::<Complex64>::zeros(self.rows(), self.cols());
        for (idx, c) in self.comps.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -((idx + 1) as f64) * theta);
            out.zip_apply(c, |o, g| *o += phase * g);
        }
        out
    }

    /// Peak gain over `grid_points` equispaced frequencies on the unit
    /// circle. This is a lower estimate of the H-infinity norm that tightens
    /// as the grid is refined.
    pub fn hinf_norm_sampled(&self, grid_points: usize) -> Result<f64> {
        if grid_points < MIN_HINF_GRID {
            return Err(Error::param(format!(
                "frequency grid needs at least {MIN_HINF_GRID} points, got {grid_points}"
            )));
        }
        if self.rows() == 0 || self.cols() == 0 {
            return Ok(0.0);
        }
        // Real coefficients: the upper half of the circle mirrors the lower.
        let peak = (0..=grid_points / 2)
            .map(|m| {
                let theta = 2.0 * std::f64::consts::PI * m as f64 / grid_points as f64;
                self.frequency_response(theta)
                    .singular_values()
                    .iter()
                    .copied()
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        Ok(peak)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn l1_examples() {
        let eye = FirTransfer::new(vec![DenseMatrix::identity(3, 3)]).unwrap();
        assert_eq!(eye.l1_norm(), 1.0);
        let g = FirTransfer::new(vec![dmatrix![1.0, -2.0], dmatrix![0.0, 3.0]]).unwrap();
        assert_eq!(g.l1_norm(), 6.0);
    }

    #[test]
    fn e1_examples() {
        let eye = FirTransfer::new(vec![DenseMatrix::identity(3, 3)]).unwrap();
        assert_eq!(eye.e1_norm(), 1.0);
        let g = FirTransfer::new(vec![dmatrix![1.0; -2.0], dmatrix![0.0; 3.0]]).unwrap();
        assert_eq!(g.e1_norm(), 6.0);
    }

    #[test]
    fn h2_examples() {
        let eye = FirTransfer::new(vec![DenseMatrix::identity(2, 2)]).unwrap();
        assert!((eye.h2_norm() - 2f64.sqrt()).abs() < 1e-15);
        let a = dmatrix![1.0, 2.0; 3.0, -4.0];
        let b = dmatrix![0.5, 0.0; -1.0, 2.0];
        let g = FirTransfer::new(vec![a.clone(), b.clone()]).unwrap();
        let mut oracle = 0.0;
        for m in [&a, &b] {
            for v in m.iter() {
                oracle += v * v;
            }
        }
        assert!((g.h2_norm() - oracle.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn hinf_examples() {
        let eye = FirTransfer::new(vec![DenseMatrix::identity(2, 2)]).unwrap();
        assert!((eye.hinf_norm_sampled(64).unwrap() - 1.0).abs() < 1e-12);
        let half = DenseMatrix::identity(2, 2) * 0.5;
        let g = FirTransfer::new(vec![half.clone(), half]).unwrap();
        assert!((g.hinf_norm_sampled(128).unwrap() - 1.0).abs() < 1e-12);
        assert!(g.hinf_norm_sampled(32).is_err());
    }

    #[test]
    fn construction_checks() {
        assert!(FirTransfer::new(vec![]).is_err());
        assert!(FirTransfer::new(vec![DenseMatrix::zeros(2, 2), DenseMatrix::zeros(2, 3)]).is_err());
        let a = FirTransfer::zeros(2, 3, 2);
        let b = FirTransfer::zeros(1, 2, 2);
        assert!(a.stack(&b).is_err());
    }
}
