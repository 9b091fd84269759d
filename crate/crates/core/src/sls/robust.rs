//! Upper bounds on the residual `Delta = [Delta_A Delta_B] [Phi_x; Phi_u]`
//! induced by bounded model errors, and the residual of a response pair
//! against a given plant.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::sls::fir::FirTransfer;

/// System norm used for the residual `Delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    L1,
    E1,
    HinfSampled { grid_points: usize },
}

impl NormKind {
    pub fn evaluate(&self, g: &FirTransfer) -> Result<f64> {
        match *self {
            NormKind::L1 => Ok(g.l1_norm()),
            NormKind::E1 => Ok(g.e1_norm()),
            NormKind::HinfSampled { grid_points } => g.hinf_norm_sampled(grid_points),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NormKind::L1 => "l1",
            NormKind::E1 => "e1",
            NormKind::HinfSampled { .. } => "hinf",
        }
    }
}

/// Model-error budget `|Delta_A| <= a`, `|Delta_B| <= b` in the matrix norm
/// matching `norm` (infinity-norm for L1, 1-norm for E1, 2-norm for H-inf),
/// with the split parameter `alpha` in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessBudget {
    pub norm: NormKind,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
}

impl RobustnessBudget {
    pub fn new(norm: NormKind, a: f64, b: f64, alpha: f64) -> Result<Self> {
        let budget = Self { norm, a, b, alpha };
        budget.validate()?;
        Ok(budget)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.a.is_finite() && self.b >= 0.0 && self.b.is_finite()) {
            return Err(Error::param(format!(
                "budgets must be finite and nonnegative, got ({}, {})",
                self.a, self.b
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!(
                "alpha must lie strictly inside (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Row weights applied to `Phi_x` and `Phi_u` in the stacked transfer
    /// whose norm is the bound.
    pub fn weights(&self) -> (f64, f64) {
        match self.norm {
            NormKind::L1 => (self.a / self.alpha, self.b / (1.0 - self.alpha)),
            NormKind::E1 => (self.a, self.b),
            NormKind::HinfSampled { .. } => {
                (self.a / self.alpha.sqrt(), self.b / (1.0 - self.alpha).sqrt())
            }
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..*self }
    }
}

fn check_pair(phi_x: &FirTransfer, phi_u: &FirTransfer) -> Result<()> {
    if phi_x.cols() != phi_u.cols() || phi_x.horizon() != phi_u.horizon() {
        return Err(Error::dims(format!(
            "Phi_x is {}x{} (T={}), Phi_u is {}x{} (T={})",
            phi_x.rows(),
            phi_x.cols(),
            phi_x.horizon(),
            phi_u.rows(),
            phi_u.cols(),
            phi_u.horizon()
        )));
    }
    Ok(())
}

fn weighted_stack(
    phi_x: &FirTransfer,
    phi_u: &FirTransfer,
    budget: &RobustnessBudget,
) -> Result<FirTransfer> {
    budget.validate()?;
    check_pair(phi_x, phi_u)?;
    let (wa, wb) = budget.weights();
    phi_x.scaled(wa).stack(&phi_u.scaled(wb))
}

/// `max{ (eps_A / alpha) |Phi_x|_L1, (eps_B / (1 - alpha)) |Phi_u|_L1 }`.
pub fn robust_bound_l1(
    phi_x: &FirTransfer,
    phi_u: &FirTransfer,
    budget: &RobustnessBudget,
) -> Result<f64> {
    budget.validate()?;
    check_pair(phi_x, phi_u)?;
    let (wa, wb) = RobustnessBudget {
        norm: NormKind::L1,
        ..*budget
    }
    .weights();
    Ok((wa * phi_x.l1_norm()).max(wb * phi_u.l1_norm()))
}

/// `| [nu_A Phi_x; nu_B Phi_u] |_E1`.
pub fn robust_bound_e1(
    phi_x: &FirTransfer,
    phi_u: &FirTransfer,
    budget: &RobustnessBudget,
) -> Result<f64> {
    let stacked = weighted_stack(
        phi_x,
        phi_u,
        &RobustnessBudget {
            norm: NormKind::E1,
            ..*budget
        },
    )?;
    Ok(stacked.e1_norm())
}

/// Sampled `| [rho_A / sqrt(alpha) Phi_x; rho_B / sqrt(1 - alpha) Phi_u] |_Hinf`.
pub fn robust_bound_hinf(
    phi_x: &FirTransfer,
    phi_u: &FirTransfer,
    budget: &RobustnessBudget,
    grid_points: usize,
) -> Result<f64> {
    let stacked = weighted_stack(
        phi_x,
        phi_u,
        &RobustnessBudget {
            norm: NormKind::HinfSampled { grid_points },
            ..*budget
        },
    )?;
    stacked.hinf_norm_sampled(grid_points)
}

/// Bound matching `budget.norm`.
pub fn robust_bound(
    phi_x: &FirTransfer,
    phi_u: &FirTransfer,
    budget: &RobustnessBudget,
) -> Result<f64> {
    match budget.norm {
        NormKind::L1 => robust_bound_l1(phi_x, phi_u, budget),
        NormKind::E1 => robust_bound_e1(phi_x, phi_u, budget),
        NormKind::HinfSampled { grid_points } => {
            robust_bound_hinf(phi_x, phi_u, budget, grid_points)
        }
    }
}

/// Tolerance on `Phi_x[1] = I`.
pub const IDENTITY_TOL: f64 = 1e-12;

/// Residual of `[zI - A, -B2] [Phi_x; Phi_u] = I + Delta`.
///
/// With `Phi_x[1] = I` the constant term vanishes and
/// `Delta[k] = Phi_x[k+1] - A Phi_x[k] - B2 Phi_u[k]` for `k < T`,
/// `Delta[T] = -A Phi_x[T] - B2 Phi_u[T]`.
pub fn sls_residual(
    a: &DenseMatrix,
    b2: &DenseMatrix,
    phi_x: &FirTransfer,
    phi_u: &FirTransfer,
) -> Result<FirTransfer> {
    check_pair(phi_x, phi_u)?;
    let n = a.nrows();
    if !a.is_square()
        || phi_x.rows() != n
        || phi_x.cols() != n
        || b2.nrows() != n
        || b2.ncols() != phi_u.rows()
    {
        return Err(Error::dims(format!(
            "A {:?}, B2 {:?}, Phi_x {}x{}, Phi_u {}x{}",
            a.shape(),
            b2.shape(),
            phi_x.rows(),
            phi_x.cols(),
            phi_u.rows(),
            phi_u.cols()
        )));
    }
    let lead = (phi_x.component(1) - DenseMatrix::identity(n, n)).abs().max();
    if lead > IDENTITY_TOL {
        return Err(Error::ContractViolation(format!(
            "Phi_x[1] differs from the identity by {lead:e}"
        )));
    }
    let t = phi_x.horizon();
    let comps = (1..=t)
        .map(|k| {
            let mut d = -(a * phi_x.component(k)) - b2 * phi_u.component(k);
            if k < t {
                d += phi_x.component(k + 1);
            }
            d
        })
        .collect();
    FirTransfer::new(comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn fir(c: Vec<DenseMatrix>) -> FirTransfer {
        FirTransfer::new(c).unwrap()
    }

    #[test]
    fn l1_bound_arithmetic() {
        // |Phi_x|_L1 = 2, |Phi_u|_L1 = 3.
        let phi_x = fir(vec![dmatrix![2.0]]);
        let phi_u = fir(vec![dmatrix![-3.0]]);
        let budget = RobustnessBudget::new(NormKind::L1, 0.1, 0.1, 0.5).unwrap();
        let b = robust_bound_l1(&phi_x, &phi_u, &budget).unwrap();
        assert!((b - 0.6).abs() < 1e-15);
        let zero = RobustnessBudget::new(NormKind::L1, 0.0, 0.0, 0.5).unwrap();
        assert_eq!(robust_bound_l1(&phi_x, &phi_u, &zero).unwrap(), 0.0);
    }

    #[test]
    fn e1_bound_examples() {
        let phi_x = fir(vec![DenseMatrix::identity(2, 2)]);
        let phi_u = fir(vec![dmatrix![1.0, 2.0]]);
        let zero = RobustnessBudget::new(NormKind::E1, 0.0, 0.0, 0.5).unwrap();
        assert_eq!(robust_bound_e1(&phi_x, &phi_u, &zero).unwrap(), 0.0);
        let only_a = RobustnessBudget::new(NormKind::E1, 1.0, 0.0, 0.5).unwrap();
        assert_eq!(robust_bound_e1(&phi_x, &phi_u, &only_a).unwrap(), 1.0);
    }

    #[test]
    fn hinf_bound_examples() {
        let phi_x = fir(vec![DenseMatrix::identity(2, 2)]);
        let phi_u = fir(vec![DenseMatrix::zeros(0, 2)]);
        let zero = RobustnessBudget::new(NormKind::HinfSampled { grid_points: 64 }, 0.0, 0.0, 0.25)
            .unwrap();
        assert_eq!(robust_bound_hinf(&phi_x, &phi_u, &zero, 64).unwrap(), 0.0);
        let budget =
            RobustnessBudget::new(NormKind::HinfSampled { grid_points: 64 }, 1.0, 0.0, 0.25)
                .unwrap();
        let b = robust_bound_hinf(&phi_x, &phi_u, &budget, 64).unwrap();
        assert!((b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn budget_validation() {
        assert!(RobustnessBudget::new(NormKind::L1, 0.1, 0.1, 0.0).is_err());
        assert!(RobustnessBudget::new(NormKind::L1, 0.1, 0.1, 1.0).is_err());
        assert!(RobustnessBudget::new(NormKind::L1, -0.1, 0.1, 0.5).is_err());
    }

    #[test]
    fn deadbeat_residual_is_zero() {
        let a = DenseMatrix::zeros(2, 2);
        let b2 = DenseMatrix::identity(2, 2);
        let phi_x = fir(vec![DenseMatrix::identity(2, 2)]);
        let phi_u = fir(vec![DenseMatrix::zeros(2, 2)]);
        let d = sls_residual(&a, &b2, &phi_x, &phi_u).unwrap();
        assert_eq!(d.l1_norm(), 0.0);
    }

    #[test]
    fn scalar_residual_expansion() {
        // Hand expansion of (z - a) Phi_x - b Phi_u for T = 2.
        let (a, b, phi, psi) = (0.7, 1.3, -0.4, 0.25);
        let x2 = 0.1;
        let d = sls_residual(
            &dmatrix![a],
            &dmatrix![b],
            &fir(vec![dmatrix![1.0], dmatrix![x2]]),
            &fir(vec![dmatrix![phi], dmatrix![psi]]),
        )
        .unwrap();
        assert!((d.component(1)[(0, 0)] - (x2 - a - b * phi)).abs() < 1e-15);
        assert!((d.component(2)[(0, 0)] - (-a * x2 - b * psi)).abs() < 1e-15);

        let consistent = a + b * phi;
        let d = sls_residual(
            &dmatrix![a],
            &dmatrix![b],
            &fir(vec![dmatrix![1.0], dmatrix![consistent]]),
            &fir(vec![dmatrix![phi], dmatrix![psi]]),
        )
        .unwrap();
        assert!(d.component(1)[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn residual_requires_identity_lead() {
        let err = sls_residual(
            &dmatrix![0.5],
            &dmatrix![1.0],
            &fir(vec![dmatrix![0.9]]),
            &fir(vec![dmatrix![0.0]]),
        );
        assert!(matches!(err, Err(Error::ContractViolation(_))));
    }
}
