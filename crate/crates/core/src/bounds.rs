//! A-priori and measured bounds on the discretization error.
//!
//! `truncation_bound` covers the first-order truncation. For banded drift
//! matrices the entries of the exponential decay away from the band, and
//! [`iserles_entry_bound`] bounds that decay entrywise. Summing the entry
//! bound over the off-band index pairs gives [`delta_norm_bounds`], scalar-only
//! bounds on the 2-, infinity- and 1-norm of the neglected part of the
//! projected exponential.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::matrix::{ensure_finite, ensure_square, norm_unchecked, DenseMatrix, MatrixNormKind};

/// Bandwidth and entry scale of `Ahat tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandedProfile {
    pub s: usize,
    /// `|Ahat tau|_max`.
    pub alpha: f64,
    pub n: usize,
}

impl BandedProfile {
    /// Profile of `Ahat tau` with exact-zero bandwidth detection.
    pub fn of(a_hat: &DenseMatrix, tau: f64, zero_tol: f64) -> Result<Self> {
        let s = bandwidth(a_hat, zero_tol)?;
        Ok(Self {
            s,
            alpha: norm_unchecked(a_hat, MatrixNormKind::Max) * tau,
            n: a_hat.nrows(),
        })
    }
}

/// Upper bounds (or measured values) for `(|D|_2, |D|_inf, |D|_1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeltaBounds {
    pub rho: f64,
    pub eps: f64,
    pub nu: f64,
}

impl DeltaBounds {
    /// True when every component of `self` is at least the matching one in
    /// `other`.
    pub fn dominates(&self, other: &DeltaBounds) -> bool {
        self.rho >= other.rho && self.eps >= other.eps && self.nu >= other.nu
    }
}

/// Smallest `s` with `|M_ij| <= zero_tol` whenever `|i - j| > s`.
pub fn bandwidth(m: &DenseMatrix, zero_tol: f64) -> Result<usize> {
    ensure_square(m)?;
    let mut s = 0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)].abs() > zero_tol {
                s = s.max(i.abs_diff(j));
            }
        }
    }
    Ok(s)
}

/// Keep the entries with `|i - j| <= s`.
pub fn band_extract(m: &DenseMatrix, s: usize) -> Result<DenseMatrix> {
    ensure_square(m)?;
    let n = m.nrows();
    if n > 0 && s > n - 1 {
        return Err(Error::param(format!("bandwidth {s} exceeds n - 1 = {}", n - 1)));
    }
    Ok(DenseMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) <= s {
            m[(i, j)]
        } else {
            0.0
        }
    }))
}

/// Bound on `|(I + Ahat tau) - e^{Ahat tau}|_2` in terms of `|Ahat|_2`.
pub fn truncation_bound(norm2_a_hat: f64, tau: f64) -> Result<f64> {
    if !(norm2_a_hat >= 0.0 && norm2_a_hat.is_finite()) {
        return Err(Error::param(format!(
            "|Ahat|_2 must be finite and nonnegative, got {norm2_a_hat}"
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param(format!("tau must be positive, got {tau}")));
    }
    let product = tau * norm2_a_hat;
    if product >= 3.0 {
        return Err(Error::BoundInapplicable { product });
    }
    Ok(product * product / 2.0 / (1.0 - product / 3.0))
}

/// Decay bound on `|[e^{Ahat tau}]_ij|` for a bandwidth-`s` drift with
/// `alpha = |Ahat tau|_max`:
///
/// `(alpha s / k)^(k / s) * sum_{m >= k} (k / s)^m / m!`, with `k = |i - j|`.
///
/// The bracket `e^x - sum_{m < k} x^m / m!` is evaluated as its forward tail
/// and everything is combined in log space, so distances in the thousands
/// neither overflow nor cancel. Only the off-band regime `k > s` is accepted.
pub fn iserles_entry_bound(i: usize, j: usize, alpha: f64, s: usize) -> Result<f64> {
    if s == 0 {
        return Err(Error::Domain("bandwidth must be at least 1".into()));
    }
    let k = i.abs_diff(j);
    if k <= s {
        return Err(Error::Domain(format!(
            "|i - j| = {k} lies inside the band s = {s}"
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::param(format!("alpha must be nonnegative, got {alpha}")));
    }
    Ok(decay_bound(k, alpha, s))
}

fn decay_bound(k: usize, alpha: f64, s: usize) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    let x = kf / s as f64;
    let log_power = x * (alpha * s as f64 / kf).ln();
    let log_first = kf * x.ln() - ln_gamma(kf + 1.0);
    // Terms relative to the first one; the ratio x / (m + 1) is below 1.
    let mut rel_sum = 1.0;
    let mut term = 1.0;
    let mut m = kf;
    loop {
        term *= x / (m + 1.0);
        m += 1.0;
        if term < 1e-18 * rel_sum {
            break;
        }
        rel_sum += term;
    }
    (log_power + log_first + rel_sum.ln()).exp()
}

/// Scalar-only bounds on the off-band part of `e^{Ahat tau}` for an
/// `n x n` drift of bandwidth `s`.
///
/// `rho` sums the entry bound over every pair with `|i - j| > s`, `eps` takes
/// the largest row sum and `nu` the largest column sum.
pub fn delta_norm_bounds(n: usize, alpha: f64, s: usize) -> Result<DeltaBounds> {
    if n < 2 {
        return Err(Error::param(format!("n must be at least 2, got {n}")));
    }
    if s == 0 {
        return Err(Error::Domain("bandwidth must be at least 1".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::param(format!("alpha must be nonnegative, got {alpha}")));
    }
    // The entry bound depends on (i, j) only through |i - j|.
    let by_distance: Vec<f64> = (0..n)
        .map(|k| if k > s { decay_bound(k, alpha, s) } else { 0.0 })
        .collect();

    let mut total = 0.0;
    let mut max_row: f64 = 0.0;
    for i in 0..n {
        let row: f64 = (0..n)
            .filter(|&j| i.abs_diff(j) > s)
            .map(|j| by_distance[i.abs_diff(j)])
            .sum();
        total += row;
        max_row = max_row.max(row);
    }
    let mut max_col: f64 = 0.0;
    for j in 0..n {
        let col: f64 = (0..n)
            .filter(|&i| i.abs_diff(j) > s)
            .map(|i| by_distance[i.abs_diff(j)])
            .sum();
        max_col = max_col.max(col);
    }
    Ok(DeltaBounds {
        rho: total,
        eps: max_row,
        nu: max_col,
    })
}

/// `Delta = A_dense - A_sparse` together with its 2-, infinity- and 1-norm.
pub fn empirical_delta(
    a_dense: &DenseMatrix,
    a_sparse: &DenseMatrix,
) -> Result<(DenseMatrix, DeltaBounds)> {
    if a_dense.shape() != a_sparse.shape() {
        return Err(Error::dims(format!(
            "dense {:?} vs sparse {:?}",
            a_dense.shape(),
            a_sparse.shape()
        )));
    }
    ensure_finite(a_dense, "A_dense")?;
    ensure_finite(a_sparse, "A_sparse")?;
    let delta = a_dense - a_sparse;
    let norms = DeltaBounds {
        rho: norm_unchecked(&delta, MatrixNormKind::Two),
        eps: norm_unchecked(&delta, MatrixNormKind::Infinity),
        nu: norm_unchecked(&delta, MatrixNormKind::One),
    };
    Ok((delta, norms))
}
