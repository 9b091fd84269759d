//! Closed-loop simulation of a response-based controller and the stability
//! test for the residual feedback `(I + Delta)^{-1}`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::discretize::DiscretePlant;
use crate::error::{Error, Result};
use crate::sls::fir::FirTransfer;

/// Companion size up to which the spectral radius uses a dense eigensolver.
pub const DENSE_EIG_LIMIT: usize = 400;
/// Margin below one required to call the residual loop stable.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Controller `K = Phi_u Phi_x^{-1}` realized through the reconstructed
/// disturbance `w_hat`.
#[derive(Debug, Clone)]
pub struct ControllerState {
    phi_x: FirTransfer,
    phi_u: FirTransfer,
    /// `w_hat` history, most recent first, exactly `T` long.
    buffer: VecDeque<DVector<f64>>,
    /// Prediction of the next state.
    x_hat: DVector<f64>,
}

impl ControllerState {
    pub fn new(phi_x: FirTransfer, phi_u: FirTransfer) -> Result<Self> {
        let n = phi_x.rows();
        if phi_x.cols() != n || phi_u.cols() != n || phi_u.horizon() != phi_x.horizon() {
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
        let t = phi_x.horizon();
        Ok(Self {
            buffer: VecDeque::from(vec![DVector::zeros(n); t]),
            x_hat: DVector::zeros(n),
            phi_x,
            phi_u,
        })
    }

    pub fn states(&self) -> usize {
        self.phi_x.rows()
    }

    pub fn inputs(&self) -> usize {
        self.phi_u.rows()
    }

    pub fn horizon(&self) -> usize {
        self.phi_x.horizon()
    }

    /// Consume `x_k`, return `u_k`.
    pub fn step(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.states() {
            return Err(Error::dims(format!(
                "state has {} entries, controller expects {}",
                x.len(),
                self.states()
            )));
        }
        let w_hat = x - &self.x_hat;
        self.buffer.pop_back();
        self.buffer.push_front(w_hat);
        let mut u = DVector::zeros(self.inputs());
        for (t, w) in self.buffer.iter().enumerate() {
            u.gemv(1.0, self.phi_u.component(t + 1), w, 1.0);
        }
        let mut next = DVector::zeros(self.states());
        for t in 2..=self.horizon() {
            next.gemv(1.0, self.phi_x.component(t), &self.buffer[t - 2], 1.0);
        }
        self.x_hat = next;
        Ok(u)
    }
}

/// Functional form of [`ControllerState::step`].
pub fn controller_step(
    state: &ControllerState,
    x: &DVector<f64>,
) -> Result<(DVector<f64>, ControllerState)> {
    let mut next = state.clone();
    let u = next.step(x)?;
    Ok((u, next))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `x[0..=N]`.
    pub states: Vec<DVector<f64>>,
    /// `u[0..N]`.
    pub inputs: Vec<DVector<f64>>,
    /// `w[0..N]`.
    pub disturbances: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    /// Largest absolute state entry over the whole run.
    pub fn peak(&self) -> f64 {
        self.states.iter().map(|x| x.amax()).fold(0.0, f64::max)
    }
}

/// Simulate `x_{k+1} = A x_k + B1 w_k + B2 u_k` from `x_0 = 0` for `steps`
/// steps. Disturbances past the end of `w` are zero.
pub fn closed_loop(
    plant: &DiscretePlant,
    controller: &ControllerState,
    w: &[DVector<f64>],
    steps: usize,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::param("simulation needs at least one step"));
    }
    let n = plant.states();
    let nw = plant.b1.ncols();
    if controller.states() != n || controller.inputs() != plant.inputs() {
        return Err(Error::dims(format!(
            "controller is for {} states and {} inputs, plant has {n} and {}",
            controller.states(),
            controller.inputs(),
            plant.inputs()
        )));
    }
    if let Some(bad) = w.iter().find(|v| v.len() != nw) {
        return Err(Error::dims(format!(
            "disturbance has {} entries, B1 has {nw} columns",
            bad.len()
        )));
    }
    let mut ctrl = controller.clone();
    let mut x = DVector::zeros(n);
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps);
    let mut disturbances = Vec::with_capacity(steps);
    for k in 0..steps {
        let u = ctrl.step(&x)?;
        let wk = w.get(k).cloned().unwrap_or_else(|| DVector::zeros(nw));
        let next = &plant.a * &x + &plant.b1 * &wk + &plant.b2 * &u;
        states.push(std::mem::replace(&mut x, next));
        inputs.push(u);
        disturbances.push(wk);
    }
    states.push(x);
    Ok(Trajectory {
        states,
        inputs,
        disturbances,
    })
}

/// Response to a unit disturbance on state `j` at `k = 0`. The plant's
/// disturbance input is replaced by the identity.
pub fn impulse_response(
    plant: &DiscretePlant,
    controller: &ControllerState,
    j: usize,
    steps: usize,
) -> Result<Trajectory> {
    let n = plant.states();
    if j >= n {
        return Err(Error::param(format!("state {j} out of range for {n} states")));
    }
    let mut w0 = DVector::zeros(n);
    w0[j] = 1.0;
    closed_loop(&plant.with_state_disturbance(), controller, &[w0], steps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub stable: bool,
    pub spectral_radius: f64,
}

fn check_square(delta: &FirTransfer) -> Result<usize> {
    let n = delta.rows();
    if delta.cols() != n {
        return Err(Error::NonSquare {
            rows: n,
            cols: delta.cols(),
        });
    }
    Ok(n)
}

/// Block companion matrix of `e_k = -sum_{j=1}^T Delta[j] e_{k-j}`.
pub fn companion(delta: &FirTransfer) -> Result<DMatrix<f64>> {
    let n = check_square(delta)?;
    let t = delta.horizon();
    let mut c = DMatrix::zeros(n * t, n * t);
    for j in 1..=t {
        c.view_mut((0, (j - 1) * n), (n, n))
            .copy_from(&(-delta.component(j)));
    }
    for b in 1..t {
        c.view_mut((b * n, (b - 1) * n), (n, n))
            .fill_with_identity();
    }
    Ok(c)
}

/// Spectral radius of the companion matrix from its dense eigenvalues.
pub fn spectral_radius_dense(delta: &FirTransfer) -> Result<f64> {
    let c = companion(delta)?;
    Ok(c.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

fn companion_apply(delta: &FirTransfer, v: &DVector<f64>) -> DVector<f64> {
    let n = delta.rows();
    let t = delta.horizon();
    let mut out = DVector::zeros(n * t);
    {
        let mut head = out.rows_mut(0, n);
        for j in 1..=t {
            head.gemv(-1.0, delta.component(j), &v.rows((j - 1) * n, n), 1.0);
        }
    }
    if t > 1 {
        out.rows_mut(n, n * (t - 1))
            .copy_from(&v.rows(0, n * (t - 1)));
    }
    out
}

/// Spectral radius estimated from the growth of companion powers,
/// `(|C^{2m} v| / |C^m v|)^{1/m}` with `m = iterations`.
pub fn spectral_radius_power(delta: &FirTransfer, iterations: usize) -> Result<f64> {
    let n = check_square(delta)?;
    let dim = n * delta.horizon();
    if iterations == 0 {
        return Err(Error::param("power iteration needs at least one step"));
    }
    // Deterministic start with no special alignment.
    let mut v = DVector::from_fn(dim, |i, _| 1.0 + ((i * 37 + 11) % 101) as f64 / 101.0);
    v /= v.norm();
    let mut log_growth = 0.0;
    for k in 0..2 * iterations {
        v = companion_apply(delta, &v);
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Ok(if norm == 0.0 { 0.0 } else { f64::INFINITY });
        }
        v /= norm;
        if k >= iterations {
            log_growth += norm.ln();
        }
    }
    Ok((log_growth / iterations as f64).exp())
}

/// Stability of `(I + Delta)^{-1}`: the recursion driven by `Delta` must
/// have spectral radius below `1 - 1e-9`. Ties count as unstable.
pub fn check_robust_stability(delta: &FirTransfer) -> Result<StabilityReport> {
    let n = check_square(delta)?;
    // The companion of a zero residual is a pure shift: nilpotent.
    let nilpotent = delta.components().iter().all(|d| d.iter().all(|v| *v == 0.0));
    let rho = if nilpotent {
        0.0
    } else if n * delta.horizon() <= DENSE_EIG_LIMIT {
        spectral_radius_dense(delta)?
    } else {
        spectral_radius_power(delta, 5000)?
    };
    Ok(StabilityReport {
        stable: rho < 1.0 - STABILITY_MARGIN,
        spectral_radius: rho,
    })
}
