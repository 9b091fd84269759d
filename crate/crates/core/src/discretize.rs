//! Exact, truncated, support-projected and bilinear discretizations of a
//! continuous-time plant.

use crate::error::{Error, Result};
use crate::matexp::{check_tau, expm_unchecked, zoh_pair};
use crate::matrix::{ensure_finite, ensure_square, DenseMatrix, SupportMask};

/// Continuous-time plant `x' = Ahat x + B1hat w + B2hat u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousPlant {
    pub a_hat: DenseMatrix,
    pub b1_hat: DenseMatrix,
    pub b2_hat: DenseMatrix,
}

impl ContinuousPlant {
    pub fn new(a_hat: DenseMatrix, b1_hat: DenseMatrix, b2_hat: DenseMatrix) -> Result<Self> {
        ensure_square(&a_hat)?;
        ensure_finite(&a_hat, "Ahat")?;
        ensure_finite(&b1_hat, "B1hat")?;
        ensure_finite(&b2_hat, "B2hat")?;
        let n = a_hat.nrows();
        if b1_hat.nrows() != n || b2_hat.nrows() != n {
            return Err(Error::dims(format!(
                "input matrices need {n} rows, got {} and {}",
                b1_hat.nrows(),
                b2_hat.nrows()
            )));
        }
        Ok(Self {
            a_hat,
            b1_hat,
            b2_hat,
        })
    }

    pub fn states(&self) -> usize {
        self.a_hat.nrows()
    }
}

/// Sampled plant with the performance output `z = C1 x + D11 w + D12 u`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePlant {
    pub a: DenseMatrix,
    pub b1: DenseMatrix,
    pub b2: DenseMatrix,
    pub c1: DenseMatrix,
    pub d11: DenseMatrix,
    pub d12: DenseMatrix,
    pub tau: f64,
}

impl DiscretePlant {
    pub fn new(
        a: DenseMatrix,
        b1: DenseMatrix,
        b2: DenseMatrix,
        c1: DenseMatrix,
        d11: DenseMatrix,
        d12: DenseMatrix,
        tau: f64,
    ) -> Result<Self> {
        check_tau(tau)?;
        ensure_square(&a)?;
        let n = a.nrows();
        let p = c1.nrows();
        let ok = b1.nrows() == n
            && b2.nrows() == n
            && c1.ncols() == n
            && d11.shape() == (p, b1.ncols())
            && d12.shape() == (p, b2.ncols());
        if !ok {
            return Err(Error::dims(format!(
                "A {:?}, B1 {:?}, B2 {:?}, C1 {:?}, D11 {:?}, D12 {:?}",
                a.shape(),
                b1.shape(),
                b2.shape(),
                c1.shape(),
                d11.shape(),
                d12.shape()
            )));
        }
        for (m, name) in [
            (&a, "A"),
            (&b1, "B1"),
            (&b2, "B2"),
            (&c1, "C1"),
            (&d11, "D11"),
            (&d12, "D12"),
        ] {
            ensure_finite(m, name)?;
        }
        Ok(Self {
            a,
            b1,
            b2,
            c1,
            d11,
            d12,
            tau,
        })
    }

    /// Plant with the standard weights `C1 = [I; 0]`, `D12 = [0; I]` and
    /// `D11 = 0`, so the cost penalizes state and input energy equally.
    pub fn with_unit_weights(
        a: DenseMatrix,
        b1: DenseMatrix,
        b2: DenseMatrix,
        tau: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        let nu = b2.ncols();
        let (c1, d12) = unit_weights(n, nu);
        let d11 = DenseMatrix::zeros(n + nu, b1.ncols());
        Self::new(a, b1, b2, c1, d11, d12, tau)
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b2.ncols()
    }

    /// Same plant with `B1 = I`, so disturbances enter directly as state
    /// increments.
    pub fn with_state_disturbance(&self) -> Self {
        let n = self.states();
        let p = self.c1.nrows();
        Self {
            b1: DenseMatrix::identity(n, n),
            d11: DenseMatrix::zeros(p, n),
            ..self.clone()
        }
    }
}

/// `C1 = [I; 0]` and `D12 = [0; I]` for `n` states and `nu` inputs.
pub fn unit_weights(n: usize, nu: usize) -> (DenseMatrix, DenseMatrix) {
    let mut c1 = DenseMatrix::zeros(n + nu, n);
    let mut d12 = DenseMatrix::zeros(n + nu, nu);
    for i in 0..n {
        c1[(i, i)] = 1.0;
    }
    for i in 0..nu {
        d12[(n + i, i)] = 1.0;
    }
    (c1, d12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ZohExact,
    Truncated,
    Projected,
    Tustin,
}

/// Entries whose magnitude exceeds `zero_tol`.
pub fn support(m: &DenseMatrix, zero_tol: f64) -> SupportMask {
    SupportMask::of_matrix(m, zero_tol)
}

/// `supp(|Ahat| + I)`: the pattern kept by the projected discretization.
pub fn drift_mask(a_hat: &DenseMatrix) -> SupportMask {
    let mut mask = SupportMask::of_matrix(a_hat, 0.0);
    for i in 0..a_hat.nrows().min(a_hat.ncols()) {
        mask.set(i, i, true);
    }
    mask
}

/// `supp((|Ahat| + I) |Bhat|)`, evaluated structurally.
pub fn input_mask(a_hat: &DenseMatrix, b_hat: &DenseMatrix) -> Result<SupportMask> {
    drift_mask(a_hat).bool_product(&SupportMask::of_matrix(b_hat, 0.0))
}

/// First-order truncation `I + Ahat tau`.
pub fn truncate_first_order(a_hat: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    ensure_square(a_hat)?;
    ensure_finite(a_hat, "Ahat")?;
    check_tau(tau)?;
    let n = a_hat.nrows();
    Ok(DenseMatrix::identity(n, n) + a_hat * tau)
}

/// Exponential `e^{Ahat tau}` restricted to `supp(|Ahat| + I)`.
pub fn project_a(a_hat: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    ensure_square(a_hat)?;
    ensure_finite(a_hat, "Ahat")?;
    check_tau(tau)?;
    drift_mask(a_hat).apply(&expm_unchecked(&(a_hat * tau)))
}

/// ZOH input matrix restricted to `supp((|Ahat| + I) |Bhat|)`.
pub fn project_b(a_hat: &DenseMatrix, b_hat: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    let (_, b) = zoh_pair(a_hat, b_hat, tau)?;
    input_mask(a_hat, b_hat)?.apply(&b)
}

/// Pivots below this magnitude make the bilinear transform singular.
pub const TUSTIN_PIVOT_TOL: f64 = 1e-12;

/// Bilinear (Tustin) transform.
///
/// `A = (I - tau/2 Ahat)^{-1} (I + tau/2 Ahat)`,
/// `B = tau/2 (I - tau/2 Ahat)^{-1} Bhat`.
pub fn tustin(
    a_hat: &DenseMatrix,
    b_hat: &DenseMatrix,
    tau: f64,
) -> Result<(DenseMatrix, DenseMatrix)> {
    ensure_square(a_hat)?;
    ensure_finite(a_hat, "Ahat")?;
    ensure_finite(b_hat, "Bhat")?;
    check_tau(tau)?;
    let n = a_hat.nrows();
    if b_hat.nrows() != n {
        return Err(Error::dims(format!(
            "Bhat has {} rows, Ahat is {n}x{n}",
            b_hat.nrows()
        )));
    }
    let eye = DenseMatrix::identity(n, n);
    let half = a_hat * (tau / 2.0);
    let lu = (&eye - &half).lu();
    let pivot = lu
        .u()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if n > 0 && pivot <= TUSTIN_PIVOT_TOL {
        return Err(Error::SingularPencil { pivot });
    }
    let a = lu.solve(&(&eye + &half)).ok_or(Error::SingularPencil { pivot })?;
    let b = lu
        .solve(&(b_hat * (tau / 2.0)))
        .ok_or(Error::SingularPencil { pivot })?;
    Ok((a, b))
}

/// Discretize both input channels with the chosen method and attach the
/// performance output unchanged.
///
/// The truncated method uses `B_i = tau Bhat_i`, the first-order term of the
/// hold integral.
pub fn discretize_all(
    plant: &ContinuousPlant,
    c1: DenseMatrix,
    d11: DenseMatrix,
    d12: DenseMatrix,
    tau: f64,
    method: Method,
) -> Result<DiscretePlant> {
    let n = plant.states();
    let nw = plant.b1_hat.ncols();
    let joint = {
        let mut b = DenseMatrix::zeros(n, nw + plant.b2_hat.ncols());
        b.view_mut((0, 0), (n, nw)).copy_from(&plant.b1_hat);
        b.view_mut((0, nw), (n, plant.b2_hat.ncols()))
            .copy_from(&plant.b2_hat);
        b
    };
    let split = |b: DenseMatrix| -> (DenseMatrix, DenseMatrix) {
        let nu = b.ncols() - nw;
        (
            b.view((0, 0), (n, nw)).into_owned(),
            b.view((0, nw), (n, nu)).into_owned(),
        )
    };
    let (a, b1, b2) = match method {
        Method::ZohExact => {
            let (a, b) = zoh_pair(&plant.a_hat, &joint, tau)?;
            let (b1, b2) = split(b);
            (a, b1, b2)
        }
        Method::Truncated => (
            truncate_first_order(&plant.a_hat, tau)?,
            &plant.b1_hat * tau,
            &plant.b2_hat * tau,
        ),
        Method::Projected => {
            let (a, b) = zoh_pair(&plant.a_hat, &joint, tau)?;
            let (b1, b2) = split(b);
            (
                drift_mask(&plant.a_hat).apply(&a)?,
                input_mask(&plant.a_hat, &plant.b1_hat)?.apply(&b1)?,
                input_mask(&plant.a_hat, &plant.b2_hat)?.apply(&b2)?,
            )
        }
        Method::Tustin => {
            let (a, b) = tustin(&plant.a_hat, &joint, tau)?;
            let (b1, b2) = split(b);
            (a, b1, b2)
        }
    };
    DiscretePlant::new(a, b1, b2, c1, d11, d12, tau)
}
