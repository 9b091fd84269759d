//! Deterministic fixtures shared by the benchmarks.

use nalgebra::DMatrix;
use sparsedisc::{DenseMatrix, DiscretePlant};

/// Banded `n x n` drift matrix with bandwidth `s` and a stable diagonal.
pub fn banded(n: usize, s: usize) -> DenseMatrix {
    DMatrix::from_fn(n, n, |i, j| {
        let d = i.abs_diff(j);
        if d == 0 {
            -1.0
        } else if d <= s {
            // Fixed pseudo-random pattern, reproducible across runs.
            let h = ((i * 7919 + j * 104_729) % 1000) as f64 / 1000.0;
            0.5 * (h - 0.5) / d as f64
        } else {
            0.0
        }
    })
}

/// Tridiagonal chain with one actuator per state.
pub fn chain_plant(n: usize) -> DiscretePlant {
    let a = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 0.8,
        1 => 0.4,
        _ => 0.0,
    });
    DiscretePlant::with_unit_weights(a, DMatrix::identity(n, n), DMatrix::identity(n, n), 1.0)
        .expect("chain plant is well formed")
}
