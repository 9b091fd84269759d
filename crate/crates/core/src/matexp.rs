//! Dense matrix exponential and zero-order-hold sampling.
//!
//! The exponential uses scaling and squaring around a diagonal Padé
//! approximant (degrees 3, 5, 7, 9 or 13). The degree is the smallest whose
//! backward-error threshold covers the 1-norm of the input; larger inputs are
//! scaled by a power of two into the degree-13 region and squared back.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{ensure_finite, ensure_square, norm_unchecked, DenseMatrix, MatrixNormKind};

// Backward-error thresholds for double precision.
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Loosest accuracy accepted by [`expm`].
pub const MAX_ACCURACY: f64 = 1e-3;

/// Default accuracy used by the discretization routines.
pub const DEFAULT_ACCURACY: f64 = 1e-12;

/// Matrix exponential `e^M`.
///
/// `accuracy` is the relative error the caller needs and must lie in
/// `(0, 1e-3]`. The approximant always targets unit roundoff, so every
/// admissible accuracy is met.
pub fn expm(m: &DenseMatrix, accuracy: f64) -> Result<DenseMatrix> {
    ensure_square(m)?;
    ensure_finite(m, "M")?;
    if !(accuracy > 0.0 && accuracy <= MAX_ACCURACY) {
        return Err(Error::param(format!(
            "accuracy must lie in (0, {MAX_ACCURACY}], got {accuracy}"
        )));
    }
    Ok(expm_unchecked(m))
}

pub(crate) fn expm_unchecked(m: &DenseMatrix) -> DenseMatrix {
    let n = m.nrows();
    if n == 0 {
        return DenseMatrix::zeros(0, 0);
    }
    let norm1 = norm_unchecked(m, MatrixNormKind::One);
    if norm1 == 0.0 {
        return DenseMatrix::identity(n, n);
    }

    for (theta, coeffs) in [
        (THETA_3, &PADE_3[..]),
        (THETA_5, &PADE_5[..]),
        (THETA_7, &PADE_7[..]),
        (THETA_9, &PADE_9[..]),
    ] {
        if norm1 <= theta {
            let (u, v) = pade_low(m, coeffs);
            return solve_pade(&u, &v);
        }
    }

    let squarings = if norm1 > THETA_13 {
        (norm1 / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = m * 2f64.powi(-squarings);
    let (u, v) = pade_13(&scaled);
    let mut e = solve_pade(&u, &v);
    for _ in 0..squarings {
        e = &e * &e;
    }
    e
}

fn pade_low(m: &DenseMatrix, b: &[f64]) -> (DenseMatrix, DenseMatrix) {
    let n = m.nrows();
    let eye = DenseMatrix::identity(n, n);
    let m2 = m * m;
    // Even powers M^0, M^2, M^4, ...
    let mut powers = vec![eye, m2.clone()];
    let degree = b.len() - 1;
    while 2 * (powers.len() - 1) + 1 < degree {
        let next = powers.last().unwrap() * &m2;
        powers.push(next);
    }
    let mut u_inner = DenseMatrix::zeros(n, n);
    let mut v = DenseMatrix::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        if 2 * k + 1 <= degree {
            u_inner += p * b[2 * k + 1];
        }
        if 2 * k <= degree {
            v += p * b[2 * k];
        }
    }
    (m * u_inner, v)
}

fn pade_13(m: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let b = &PADE_13;
    let n = m.nrows();
    let eye = DenseMatrix::identity(n, n);
    let m2 = m * m;
    let m4 = &m2 * &m2;
    let m6 = &m4 * &m2;
    let u_hi = &m6 * (&m6 * b[13] + &m4 * b[11] + &m2 * b[9]);
    let u = m * (u_hi + &m6 * b[7] + &m4 * b[5] + &m2 * b[3] + &eye * b[1]);
    let v_hi = &m6 * (&m6 * b[12] + &m4 * b[10] + &m2 * b[8]);
    let v = v_hi + &m6 * b[6] + &m4 * b[4] + &m2 * b[2] + &eye * b[0];
    (u, v)
}

fn solve_pade(u: &DenseMatrix, v: &DenseMatrix) -> DenseMatrix {
    let q = v - u;
    let p = v + u;
    // The denominator is well conditioned inside the theta regions.
    q.lu()
        .solve(&p)
        .expect("Pade denominator is nonsingular for scaled inputs")
}

/// Zero-order-hold sampling of `(Ahat, Bhat)` with period `tau`.
///
/// Returns `A = e^{Ahat tau}` and `B = int_0^tau e^{Ahat s} ds Bhat`, both
/// read off the exponential of the block matrix `[[Ahat, Bhat], [0, 0]] tau`.
pub fn zoh_pair(
    a_hat: &DenseMatrix,
    b_hat: &DenseMatrix,
    tau: f64,
) -> Result<(DenseMatrix, DenseMatrix)> {
    ensure_square(a_hat)?;
    ensure_finite(a_hat, "Ahat")?;
    ensure_finite(b_hat, "Bhat")?;
    if b_hat.nrows() != a_hat.nrows() {
        return Err(Error::dims(format!(
            "Bhat has {} rows, Ahat is {}x{}",
            b_hat.nrows(),
            a_hat.nrows(),
            a_hat.ncols()
        )));
    }
    check_tau(tau)?;
    let n = a_hat.nrows();
    let m = b_hat.ncols();
    let mut block = DMatrix::zeros(n + m, n + m);
    block.view_mut((0, 0), (n, n)).copy_from(&(a_hat * tau));
    block.view_mut((0, n), (n, m)).copy_from(&(b_hat * tau));
    let e = expm_unchecked(&block);
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    ))
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("tau must be positive, got {tau}")))
    }
}
