//! Locality-constrained H2 synthesis over FIR responses, with a cap on the
//! residual norm (or on a model-error bound) and bisection on the cap.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::discretize::DiscretePlant;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::sls::fir::FirTransfer;
use crate::sls::locality::LocalityConstraint;
use crate::sls::robust::{sls_residual, NormKind, RobustnessBudget};
use crate::sls::solver::{
    admm, cost_map, reduce_equality, residual_map, weighted_response_map, Affine, AdmmStatus,
    Ball, ColumnLayout, ReducedColumn, SignalSpace, SolverSettings,
};

/// Strict `|.| < gamma` is solved as `|.| <= gamma - STRICT_MARGIN`.
pub const STRICT_MARGIN: f64 = 1e-9;
/// Largest constraint violation accepted for an `Optimal` verdict.
pub const CONSTRAINT_TOL: f64 = crate::sls::solver::VIOLATION_TOL;

/// What the cap `gamma` applies to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaConstraint {
    /// `|Delta| <= gamma` for the residual against the design plant.
    Residual(NormKind),
    /// Exact response on the design plant, and the model-error bound of the
    /// budget at most `gamma`. `alpha` is searched by the bisection.
    ModelError(RobustnessBudget),
}

impl DeltaConstraint {
    pub fn norm(&self) -> NormKind {
        match self {
            DeltaConstraint::Residual(n) => *n,
            DeltaConstraint::ModelError(b) => b.norm,
        }
    }

    fn ball(&self) -> Ball {
        match self.norm() {
            NormKind::L1 => Ball::RowL1,
            NormKind::E1 => Ball::ColL1,
            NormKind::HinfSampled { grid_points } => Ball::Spectral { grid: grid_points },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisStatus {
    Optimal,
    Infeasible,
    SolverLimit,
}

impl SynthesisStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SynthesisStatus::Optimal => "optimal",
            SynthesisStatus::Infeasible => "infeasible",
            SynthesisStatus::SolverLimit => "solver_limit",
        }
    }
}

/// One inner solve of the bisection.
#[derive(Debug, Clone, PartialEq)]
pub struct BisectionStep {
    pub gamma: f64,
    pub status: SynthesisStatus,
    pub cost: f64,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub phi_x: FirTransfer,
    pub phi_u: FirTransfer,
    /// Residual against the design plant.
    pub delta: FirTransfer,
    pub gamma: f64,
    /// `|[C1 D12][Phi_x; Phi_u]|_H2^2`.
    pub cost: f64,
    pub status: SynthesisStatus,
    pub kkt_residual: f64,
    /// Achieved value of the capped quantity.
    pub constraint_value: f64,
    /// Rate at which the optimal cost falls as `gamma` grows.
    pub sensitivity: f64,
    pub alpha: Option<f64>,
    pub iterations: usize,
    pub certificate: Option<String>,
    /// Inner solves, in order, when produced by bisection.
    pub trace: Vec<BisectionStep>,
}

impl SynthesisOutcome {
    /// `cost / (1 - gamma)`.
    pub fn merit(&self) -> f64 {
        self.cost / (1.0 - self.gamma)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SynthesisStatus::Optimal
    }
}

/// Column-wise data shared by every solve on one (plant, locality) pair.
struct Problem<'a> {
    plant: &'a DiscretePlant,
    horizon: usize,
    layouts: Vec<ColumnLayout>,
    costs: Vec<Affine>,
    residuals: Vec<Affine>,
}

impl<'a> Problem<'a> {
    fn new(plant: &'a DiscretePlant, locality: &LocalityConstraint) -> Result<Self> {
        let n = plant.states();
        let nu = plant.inputs();
        if locality.states() != n || locality.inputs() != nu {
            return Err(Error::dims(format!(
                "locality is for {} states and {} inputs, plant has {n} and {nu}",
                locality.states(),
                locality.inputs()
            )));
        }
        let t = locality.horizon();
        let layouts = (0..n)
            .map(|j| ColumnLayout::new(locality, j))
            .collect::<Result<Vec<_>>>()?;
        let costs = layouts.iter().map(|l| cost_map(plant, l, t)).collect();
        let residuals = layouts
            .iter()
            .map(|l| residual_map(&plant.a, &plant.b2, l, t))
            .collect();
        Ok(Self {
            plant,
            horizon: t,
            layouts,
            costs,
            residuals,
        })
    }
}

enum Mode {
    Equality,
    Residual(Ball),
    Robust { ball: Ball, wa: f64, wb: f64 },
}

struct ColumnsSolution {
    x: Vec<DVector<f64>>,
    status: SynthesisStatus,
    iterations: usize,
    sensitivity: f64,
    kkt: f64,
    constraint_value: f64,
    certificate: Option<String>,
}

fn infeasible(problem: &Problem, cols: &[usize], certificate: String) -> ColumnsSolution {
    ColumnsSolution {
        x: cols.iter().map(|&j| DVector::zeros(problem.layouts[j].nv)).collect(),
        status: SynthesisStatus::Infeasible,
        iterations: 0,
        sensitivity: 0.0,
        kkt: f64::NAN,
        constraint_value: f64::NAN,
        certificate: Some(certificate),
    }
}

fn solve_columns(
    problem: &Problem,
    cols: &[usize],
    mode: &Mode,
    radius: f64,
    settings: &SolverSettings,
) -> ColumnsSolution {
    let n = problem.plant.states();
    let nu = problem.plant.inputs();
    let t = problem.horizon;

    let needs_equality = !matches!(mode, Mode::Residual(_));
    let mut reductions = Vec::with_capacity(cols.len());
    if needs_equality {
        for &j in cols {
            match reduce_equality(&problem.residuals[j]) {
                Ok(r) => reductions.push(Some(r)),
                Err(mismatch) => {
                    return infeasible(
                        problem,
                        cols,
                        format!(
                            "column {j}: exact response is unreachable under the masks \
                             (least-squares residual {mismatch:.3e})"
                        ),
                    )
                }
            }
        }
    } else {
        reductions.resize_with(cols.len(), || None);
    }

    let signals: Vec<Option<Affine>> = cols
        .iter()
        .map(|&j| match mode {
            Mode::Equality => None,
            Mode::Residual(_) => Some(problem.residuals[j].clone()),
            Mode::Robust { wa, wb, .. } => Some(weighted_response_map(
                n,
                nu,
                &problem.layouts[j],
                t,
                *wa,
                *wb,
            )),
        })
        .collect();
    let reduced: Vec<ReducedColumn> = cols
        .par_iter()
        .zip(reductions.into_par_iter())
        .zip(signals.par_iter())
        .map(|((&j, red), sig)| ReducedColumn::new(&problem.costs[j], red, sig.as_ref()))
        .collect();

    let (ball, rows) = match mode {
        Mode::Equality => {
            let x = reduced.iter().map(|c| c.lift(&c.solve_unconstrained())).collect();
            let kkt = reduced
                .iter()
                .map(|c| {
                    let w = c.solve_unconstrained();
                    let g = &c.p * &w + &c.q;
                    g.amax() / (1.0 + c.q.amax())
                })
                .fold(0.0, f64::max);
            return ColumnsSolution {
                x,
                status: SynthesisStatus::Optimal,
                iterations: 1,
                sensitivity: 0.0,
                kkt,
                constraint_value: 0.0,
                certificate: None,
            };
        }
        Mode::Residual(ball) => (*ball, n),
        Mode::Robust { ball, .. } => (*ball, n + nu),
    };
    let space = SignalSpace {
        ball,
        rows,
        horizon: t,
        columns: cols.len(),
    };
    let result = admm(&reduced, &space, radius, settings);
    let signal_values: Vec<DVector<f64>> = reduced
        .iter()
        .zip(&result.w)
        .map(|(c, w)| c.signal.as_ref().unwrap().apply(w))
        .collect();
    let constraint_value = space.norm(&signal_values);
    let status = match result.status {
        AdmmStatus::Converged if constraint_value <= radius + CONSTRAINT_TOL => {
            SynthesisStatus::Optimal
        }
        AdmmStatus::Infeasible => SynthesisStatus::Infeasible,
        _ => SynthesisStatus::SolverLimit,
    };
    ColumnsSolution {
        x: reduced.iter().zip(&result.w).map(|(c, w)| c.lift(w)).collect(),
        status,
        iterations: result.iterations,
        sensitivity: result.sensitivity,
        kkt: result.kkt_residual,
        constraint_value,
        certificate: result.certificate,
    }
}

fn radius_of(gamma: f64) -> f64 {
    (gamma - STRICT_MARGIN).max(0.0)
}

fn mode_for(constraint: &DeltaConstraint, radius: f64, alpha: Option<f64>) -> Mode {
    match constraint {
        DeltaConstraint::Residual(_) if radius == 0.0 => Mode::Equality,
        DeltaConstraint::Residual(_) => Mode::Residual(constraint.ball()),
        DeltaConstraint::ModelError(budget) => {
            let b = alpha.map_or(*budget, |a| budget.with_alpha(a));
            let (wa, wb) = b.weights();
            Mode::Robust {
                ball: constraint.ball(),
                wa,
                wb,
            }
        }
    }
}

fn assemble(
    problem: &Problem,
    cols: &[usize],
    sol: ColumnsSolution,
    gamma: f64,
    alpha: Option<f64>,
) -> Result<SynthesisOutcome> {
    let plant = problem.plant;
    let n = plant.states();
    let nu = plant.inputs();
    let t = problem.horizon;
    let mut phi_x = vec![DenseMatrix::zeros(n, n); t];
    let mut phi_u = vec![DenseMatrix::zeros(nu, n); t];
    phi_x[0] = DenseMatrix::identity(n, n);
    let mut cost = 0.0;
    for (x, &j) in sol.x.iter().zip(cols) {
        let layout = &problem.layouts[j];
        for (k, i, v) in layout.x_vars() {
            phi_x[k - 1][(i, j)] = x[v];
        }
        for (k, a, v) in layout.u_vars() {
            phi_u[k - 1][(a, j)] = x[v];
        }
        cost += problem.costs[j].apply(x).norm_squared();
    }
    let phi_x = FirTransfer::new(phi_x)?;
    let phi_u = FirTransfer::new(phi_u)?;
    let delta = sls_residual(&plant.a, &plant.b2, &phi_x, &phi_u)?;
    Ok(SynthesisOutcome {
        phi_x,
        phi_u,
        delta,
        gamma,
        cost,
        status: sol.status,
        kkt_residual: sol.kkt,
        constraint_value: sol.constraint_value,
        sensitivity: sol.sensitivity,
        alpha,
        iterations: sol.iterations,
        certificate: sol.certificate,
        trace: Vec::new(),
    })
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::param(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    Ok(())
}

fn check_constraint(constraint: &DeltaConstraint) -> Result<()> {
    if let NormKind::HinfSampled { grid_points } = constraint.norm() {
        if grid_points < crate::sls::fir::MIN_HINF_GRID {
            return Err(Error::param(format!(
                "frequency grid needs at least {} points, got {grid_points}",
                crate::sls::fir::MIN_HINF_GRID
            )));
        }
    }
    if let DeltaConstraint::ModelError(b) = constraint {
        b.validate()?;
    }
    Ok(())
}

fn solve_at(
    problem: &Problem,
    constraint: &DeltaConstraint,
    gamma: f64,
    alpha: Option<f64>,
    settings: &SolverSettings,
) -> Result<SynthesisOutcome> {
    let radius = radius_of(gamma);
    let cols: Vec<usize> = (0..problem.layouts.len()).collect();
    let mode = mode_for(constraint, radius, alpha);
    let sol = solve_columns(problem, &cols, &mode, radius, settings);
    assemble(problem, &cols, sol, gamma, alpha)
}

/// Best outcome over the `alpha` grid for a model-error budget.
fn solve_best_alpha(
    problem: &Problem,
    constraint: &DeltaConstraint,
    gamma: f64,
    settings: &SolverSettings,
) -> Result<SynthesisOutcome> {
    if !matches!(constraint, DeltaConstraint::ModelError(_)) {
        return solve_at(problem, constraint, gamma, None, settings);
    }
    let mut best: Option<SynthesisOutcome> = None;
    for &alpha in &settings.alpha_grid {
        let out = solve_at(problem, constraint, gamma, Some(alpha), settings)?;
        let better = match &best {
            None => true,
            Some(b) => match (out.is_optimal(), b.is_optimal()) {
                (true, false) => true,
                (true, true) => out.cost < b.cost,
                _ => false,
            },
        };
        if better {
            best = Some(out);
        }
    }
    best.ok_or_else(|| Error::param("alpha grid is empty"))
}

/// Minimize the H2 cost subject to locality, `Phi_x[1] = I` and the cap
/// `gamma` on the constrained quantity. `gamma = 0` with a residual cap
/// enforces the exact response `Delta = 0`.
///
/// For a model-error budget the budget's own `alpha` is used.
pub fn synthesize(
    plant: &DiscretePlant,
    locality: &LocalityConstraint,
    gamma: f64,
    constraint: DeltaConstraint,
    settings: &SolverSettings,
) -> Result<SynthesisOutcome> {
    check_gamma(gamma)?;
    check_constraint(&constraint)?;
    let problem = Problem::new(plant, locality)?;
    solve_at(&problem, &constraint, gamma, None, settings)
}

/// Same program as [`synthesize`], solved as independent per-column
/// subproblems. Only valid when the cap separates by column: an E1 cap, or
/// the exact response (`gamma = 0` with a residual cap).
pub fn synthesize_columns(
    plant: &DiscretePlant,
    locality: &LocalityConstraint,
    gamma: f64,
    constraint: DeltaConstraint,
    settings: &SolverSettings,
) -> Result<SynthesisOutcome> {
    check_gamma(gamma)?;
    check_constraint(&constraint)?;
    let radius = radius_of(gamma);
    let separable = constraint.norm() == NormKind::E1
        || (matches!(constraint, DeltaConstraint::Residual(_)) && radius == 0.0);
    if !separable {
        return Err(Error::param(format!(
            "a {} cap couples the columns",
            constraint.norm().name()
        )));
    }
    let problem = Problem::new(plant, locality)?;
    let mode = mode_for(&constraint, radius, None);
    let n = plant.states();
    let parts: Vec<ColumnsSolution> = (0..n)
        .into_par_iter()
        .map(|j| solve_columns(&problem, &[j], &mode, radius, settings))
        .collect();
    let status = if parts.iter().all(|p| p.status == SynthesisStatus::Optimal) {
        SynthesisStatus::Optimal
    } else if parts.iter().any(|p| p.status == SynthesisStatus::Infeasible) {
        SynthesisStatus::Infeasible
    } else {
        SynthesisStatus::SolverLimit
    };
    let merged = ColumnsSolution {
        status,
        iterations: parts.iter().map(|p| p.iterations).max().unwrap_or(0),
        sensitivity: parts.iter().map(|p| p.sensitivity).sum(),
        kkt: parts.iter().map(|p| p.kkt).fold(0.0, f64::max),
        constraint_value: parts.iter().map(|p| p.constraint_value).fold(0.0, f64::max),
        certificate: parts.iter().find_map(|p| p.certificate.clone()),
        x: parts.into_iter().map(|mut p| p.x.remove(0)).collect(),
    };
    let cols: Vec<usize> = (0..n).collect();
    assemble(&problem, &cols, merged, gamma, None)
}

/// Bisection on `gamma` in `[0, 1)` for the merit `cost / (1 - gamma)`.
///
/// `gamma = 0` is probed first. Each later step keeps the half whose merit
/// decreases, using the cap multiplier as the slope of the optimal cost.
/// Infeasible or unconverged steps move the search up.
pub fn synthesize_bisect(
    plant: &DiscretePlant,
    locality: &LocalityConstraint,
    constraint: DeltaConstraint,
    bisect_tol: f64,
    settings: &SolverSettings,
) -> Result<SynthesisOutcome> {
    if !(bisect_tol > 0.0 && bisect_tol.is_finite()) {
        return Err(Error::param(format!(
            "bisection tolerance must be positive, got {bisect_tol}"
        )));
    }
    check_constraint(&constraint)?;
    let problem = match Problem::new(plant, locality) {
        Err(Error::MaskIdentityConflict(_)) => return Err(Error::AllInfeasible),
        other => other?,
    };
    let budget = ((1.0 / bisect_tol).log2().ceil().max(1.0)) as usize;

    let mut trace = Vec::new();
    let mut best: Option<SynthesisOutcome> = None;
    let mut record = |out: &SynthesisOutcome, best: &mut Option<SynthesisOutcome>| {
        trace.push(BisectionStep {
            gamma: out.gamma,
            status: out.status,
            cost: out.cost,
            alpha: out.alpha,
        });
        if out.is_optimal() && best.as_ref().is_none_or(|b| out.merit() < b.merit()) {
            *best = Some(out.clone());
        }
    };

    let first = solve_best_alpha(&problem, &constraint, 0.0, settings)?;
    record(&first, &mut best);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 1..budget {
        let mid = 0.5 * (lo + hi);
        let out = solve_best_alpha(&problem, &constraint, mid, settings)?;
        record(&out, &mut best);
        if !out.is_optimal() {
            lo = mid;
        } else if out.cost - out.sensitivity * (1.0 - mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut best = best.ok_or(Error::AllInfeasible)?;
    best.trace = trace;
    Ok(best)
}
