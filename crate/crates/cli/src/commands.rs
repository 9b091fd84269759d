//! The four commands. Every CSV they write depends only on the run
//! configuration; wall-clock timings go to a separate `timing.csv`.

use std::fs::File;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsedisc::sls::{sls_residual, synthesize_bisect, SolverSettings};
use sparsedisc::{
    bandwidth, check_robust_stability, closed_loop, delta_norm_bounds, empirical_delta, expm,
    impulse_response, matrix_norm, project_a, project_b, synthesize, truncate_first_order,
    truncation_bound, zoh_pair, ControllerState, DeltaBounds, DeltaConstraint, DenseMatrix,
    FirTransfer, MatrixNormKind, NormKind, RobustnessBudget, SynthesisOutcome, SynthesisStatus,
    Trajectory, DEFAULT_ACCURACY,
};

use crate::io::{fmt_f64, read_matrix, write_matrix_market};
use crate::problem::Problem;
use crate::{CliError, RunConfig};

type Csv = csv::Writer<File>;

fn csv_file(dir: &Path, name: &str) -> Result<Csv, CliError> {
    let path = dir.join(name);
    csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e))
}

fn finish(mut w: Csv) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::Input(format!("writing CSV: {e}")))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

struct Timing(Vec<(String, f64)>);

impl Timing {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn time<T>(&mut self, label: impl Into<String>, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((label.into(), start.elapsed().as_secs_f64()));
        out
    }

    fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut w = csv_file(dir, "timing.csv")?;
        w.write_record(["phase", "seconds"])?;
        for (label, secs) in &self.0 {
            w.write_record([label.clone(), format!("{secs:.6}")])?;
        }
        finish(w)
    }
}

// ---------------------------------------------------------------- discretize

/// Sample `Ahat` (and `Bhat`) every way and compare against exact ZOH.
pub fn discretize(cfg: &RunConfig) -> Result<(), CliError> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Input("discretize needs --input".into()))?;
    let mut a_hat = read_matrix(path)?;
    a_hat.iter_mut().filter(|v| v.abs() <= cfg.zero_tol).for_each(|v| *v = 0.0);
    if !a_hat.is_square() {
        return Err(CliError::Input(format!(
            "{}: drift matrix is {}x{}, expected square",
            path.display(),
            a_hat.nrows(),
            a_hat.ncols()
        )));
    }
    let tau = cfg.tau;
    let out = &cfg.out;
    let a_zoh = expm(&(&a_hat * tau), DEFAULT_ACCURACY)?;
    let a_trunc = truncate_first_order(&a_hat, tau)?;
    let a_proj = project_a(&a_hat, tau)?;
    write_matrix_market(&out.join("a_zoh.mtx"), &a_zoh)?;
    write_matrix_market(&out.join("a_trunc.mtx"), &a_trunc)?;
    write_matrix_market(&out.join("a_proj.mtx"), &a_proj)?;
    if let Some(bp) = &cfg.b {
        let b_hat = read_matrix(bp)?;
        let (_, b_zoh) = zoh_pair(&a_hat, &b_hat, tau)?;
        write_matrix_market(&out.join("b_zoh.mtx"), &b_zoh)?;
        write_matrix_market(&out.join("b_trunc.mtx"), &(&b_hat * tau))?;
        write_matrix_market(&out.join("b_proj.mtx"), &project_b(&a_hat, &b_hat, tau)?)?;
    }

    let (_, trunc) = empirical_delta(&a_zoh, &a_trunc)?;
    let (_, proj) = empirical_delta(&a_zoh, &a_proj)?;
    let norm2 = matrix_norm(&a_hat, MatrixNormKind::Two)?;
    let trunc_bound = truncation_bound(norm2, tau).ok();
    let s = bandwidth(&a_hat, 0.0)?;
    let alpha = a_hat.amax() * tau;
    let n = a_hat.nrows();
    let decay = if s == 0 || n < 2 {
        Some(DeltaBounds::default())
    } else {
        delta_norm_bounds(n, alpha, s).ok()
    };

    let mut w = csv_file(out, "summary.csv")?;
    w.write_record(["quantity", "two_norm", "inf_norm", "one_norm"])?;
    let row = |w: &mut Csv, name: &str, b: &DeltaBounds| {
        w.write_record([name.to_string(), fmt_f64(b.rho), fmt_f64(b.eps), fmt_f64(b.nu)])
    };
    row(&mut w, "truncated_error", &trunc)?;
    row(&mut w, "projected_error", &proj)?;
    w.write_record(["truncation_bound".to_string(), opt(trunc_bound), String::new(), String::new()])?;
    match decay {
        Some(b) => row(&mut w, "decay_bound", &b)?,
        None => w.write_record(["decay_bound", "", "", ""])?,
    }
    finish(w)?;

    let mut w = csv_file(out, "profile.csv")?;
    w.write_record(["n", "bandwidth", "alpha", "tau", "two_norm_ahat"])?;
    w.write_record([n.to_string(), s.to_string(), fmt_f64(alpha), fmt_f64(tau), fmt_f64(norm2)])?;
    finish(w)
}

// -------------------------------------------------------------------- bounds

/// Random bandwidth-`s` matrix, every in-band entry nonzero, largest entry
/// exactly `alpha`.
pub fn random_banded(rng: &mut ChaCha8Rng, n: usize, s: usize, alpha: f64) -> DenseMatrix {
    let mut m = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) <= s {
            let v: f64 = rng.random_range(0.1..1.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        } else {
            0.0
        }
    });
    let max = m.amax();
    m *= alpha / max;
    m
}

/// One row of the bounds experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRow {
    pub n: usize,
    pub sample: usize,
    pub alpha: f64,
    pub empirical: DeltaBounds,
    pub bound: DeltaBounds,
}

impl BoundsRow {
    pub fn dominates(&self) -> bool {
        self.bound.dominates(&self.empirical)
    }
}

/// Measured off-band error of the projected exponential against the decay
/// bounds, for each size and sample.
pub fn bounds_rows(cfg: &RunConfig) -> Result<Vec<BoundsRow>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s = cfg.bandwidth;
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        for sample in 0..cfg.samples {
            let alpha = cfg.alpha * rng.random_range(0.1..=1.0);
            // Ahat tau carries the entry scale.
            let a_hat = random_banded(&mut rng, n, s, alpha) / cfg.tau;
            let dense = expm(&(&a_hat * cfg.tau), DEFAULT_ACCURACY)?;
            let sparse = project_a(&a_hat, cfg.tau)?;
            let (_, empirical) = empirical_delta(&dense, &sparse)?;
            let bound = delta_norm_bounds(n, alpha, s)?;
            rows.push(BoundsRow {
                n,
                sample,
                alpha,
                empirical,
                bound,
            });
        }
    }
    Ok(rows)
}

pub fn bounds(cfg: &RunConfig) -> Result<(), CliError> {
    let rows = bounds_rows(cfg)?;
    let mut w = csv_file(&cfg.out, "bounds.csv")?;
    w.write_record([
        "n",
        "sample",
        "bandwidth",
        "alpha",
        "empirical_2norm",
        "bound_2norm",
        "empirical_infnorm",
        "bound_infnorm",
        "empirical_1norm",
        "bound_1norm",
        "dominates",
    ])?;
    for r in &rows {
        w.write_record([
            r.n.to_string(),
            r.sample.to_string(),
            cfg.bandwidth.to_string(),
            fmt_f64(r.alpha),
            fmt_f64(r.empirical.rho),
            fmt_f64(r.bound.rho),
            fmt_f64(r.empirical.eps),
            fmt_f64(r.bound.eps),
            fmt_f64(r.empirical.nu),
            fmt_f64(r.bound.nu),
            r.dominates().to_string(),
        ])?;
    }
    finish(w)
}

// ---------------------------------------------------------------- synthesize

fn settings(cfg: &RunConfig) -> SolverSettings {
    SolverSettings {
        alpha_grid: cfg.alpha_grid.clone(),
        ..SolverSettings::default()
    }
}

/// Residual constraint for the run: the residual itself, or the model-error
/// bound built from the measured sparse/dense mismatch.
pub fn constraint(cfg: &RunConfig, problem: &Problem) -> Result<DeltaConstraint, CliError> {
    let norm = cfg.norm_kind();
    if !cfg.robust {
        return Ok(DeltaConstraint::Residual(norm));
    }
    let dense = problem
        .dense
        .as_ref()
        .ok_or_else(|| CliError::Input("--robust needs a continuous model to compare".into()))?;
    let kind = match norm {
        NormKind::L1 => MatrixNormKind::Infinity,
        NormKind::E1 => MatrixNormKind::One,
        NormKind::HinfSampled { .. } => MatrixNormKind::Two,
    };
    let a = matrix_norm(&(&dense.a - &problem.nominal.a), kind)?;
    let b = matrix_norm(&(&dense.b2 - &problem.nominal.b2), kind)?;
    // A perfectly sampled model still needs a valid, if tiny, budget.
    let floor = f64::MIN_POSITIVE;
    Ok(DeltaConstraint::ModelError(RobustnessBudget::new(
        norm,
        a.max(floor),
        b.max(floor),
        0.5,
    )?))
}

/// Fixed-gamma solve or bisection, per the configuration.
pub fn design(
    cfg: &RunConfig,
    problem: &Problem,
    horizon: usize,
    d: usize,
) -> Result<SynthesisOutcome, CliError> {
    let loc = problem.locality(d, horizon)?;
    let constraint = constraint(cfg, problem)?;
    let settings = settings(cfg);
    Ok(match cfg.fixed_gamma() {
        Some(g) => synthesize(&problem.nominal, &loc, g, constraint, &settings)?,
        None => synthesize_bisect(&problem.nominal, &loc, constraint, cfg.bisect_tol, &settings)?,
    })
}

/// Status of the final design as an exit condition.
fn status_result(out: &SynthesisOutcome) -> Result<(), CliError> {
    let why = || out.certificate.clone().unwrap_or_else(|| out.status.as_str().into());
    match out.status {
        SynthesisStatus::Optimal => Ok(()),
        SynthesisStatus::Infeasible => Err(CliError::Infeasible(why())),
        SynthesisStatus::SolverLimit => Err(CliError::Numerical(format!(
            "solver stopped after {} iterations (KKT residual {:e})",
            out.iterations, out.kkt_residual
        ))),
    }
}

fn write_fir(dir: &Path, name: &str, g: &FirTransfer) -> Result<(), CliError> {
    let mut w = csv_file(dir, name)?;
    w.write_record(["k", "row", "col", "value"])?;
    for (k, comp) in g.components().iter().enumerate() {
        for j in 0..comp.ncols() {
            for i in 0..comp.nrows() {
                let v = comp[(i, j)];
                if v != 0.0 {
                    w.write_record([
                        (k + 1).to_string(),
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        fmt_f64(v),
                    ])?;
                }
            }
        }
    }
    finish(w)
}

/// Dense-model residual and its stability verdict.
pub struct Verification {
    pub residual_norm: f64,
    pub spectral_radius: f64,
    pub stable: bool,
}

pub fn verify(problem: &Problem, out: &SynthesisOutcome, cfg: &RunConfig) -> Result<Option<Verification>, CliError> {
    let Some(dense) = &problem.dense else {
        return Ok(None);
    };
    let delta = sls_residual(&dense.a, &dense.b2, &out.phi_x, &out.phi_u)?;
    let report = check_robust_stability(&delta)?;
    Ok(Some(Verification {
        residual_norm: cfg.norm_kind().evaluate(&delta)?,
        spectral_radius: report.spectral_radius,
        stable: report.stable,
    }))
}

fn write_summary(
    dir: &Path,
    out: &SynthesisOutcome,
    check: Option<&Verification>,
    cfg: &RunConfig,
) -> Result<(), CliError> {
    let mut w = csv_file(dir, "summary.csv")?;
    w.write_record(["key", "value"])?;
    let mut kv = |k: &str, v: String| w.write_record([k.to_string(), v]);
    kv("status", out.status.as_str().into())?;
    kv("horizon", out.phi_x.horizon().to_string())?;
    kv("locality", cfg.locality.to_string())?;
    kv("norm", cfg.norm_kind().name().into())?;
    kv("gamma", fmt_f64(out.gamma))?;
    kv("cost", fmt_f64(out.cost))?;
    kv("merit", fmt_f64(out.merit()))?;
    kv("constraint_value", fmt_f64(out.constraint_value))?;
    kv("nominal_residual", fmt_f64(cfg.norm_kind().evaluate(&out.delta)?))?;
    kv("kkt_residual", fmt_f64(out.kkt_residual))?;
    kv("sensitivity", fmt_f64(out.sensitivity))?;
    kv("alpha", opt(out.alpha))?;
    kv("iterations", out.iterations.to_string())?;
    if let Some(c) = check {
        kv("dense_residual", fmt_f64(c.residual_norm))?;
        kv("dense_spectral_radius", fmt_f64(c.spectral_radius))?;
        kv("dense_stable", c.stable.to_string())?;
    }
    if let Some(cert) = &out.certificate {
        kv("certificate", cert.clone())?;
    }
    finish(w)
}

fn write_all_infeasible(dir: &Path) -> Result<(), CliError> {
    let mut w = csv_file(dir, "summary.csv")?;
    w.write_record(["key", "value"])?;
    w.write_record(["status", "all_infeasible"])?;
    finish(w)
}

fn write_trace(dir: &Path, out: &SynthesisOutcome) -> Result<(), CliError> {
    let mut w = csv_file(dir, "trace.csv")?;
    w.write_record(["step", "gamma", "status", "cost", "alpha"])?;
    for (i, s) in out.trace.iter().enumerate() {
        w.write_record([
            i.to_string(),
            fmt_f64(s.gamma),
            s.status.as_str().to_string(),
            fmt_f64(s.cost),
            opt(s.alpha),
        ])?;
    }
    finish(w)
}

/// Feasibility and dense-model verdicts over the configured (T, d) grid.
fn sweep(cfg: &RunConfig, problem: &Problem, timing: &mut Timing) -> Result<(), CliError> {
    let mut w = csv_file(&cfg.out, "sweep.csv")?;
    w.write_record(["horizon", "locality", "status", "gamma", "cost", "dense_spectral_radius", "dense_stable"])?;
    for &t in &cfg.sweep_horizons {
        for &d in &cfg.sweep_localities {
            let result = timing.time(format!("sweep_T{t}_d{d}"), || design(cfg, problem, t, d));
            let row = match result {
                Ok(out) if out.is_optimal() => {
                    let check = verify(problem, &out, cfg)?;
                    vec![
                        out.status.as_str().to_string(),
                        fmt_f64(out.gamma),
                        fmt_f64(out.cost),
                        opt(check.as_ref().map(|c| c.spectral_radius)),
                        check.map(|c| c.stable.to_string()).unwrap_or_default(),
                    ]
                }
                Ok(out) => {
                    let mut row = vec![out.status.as_str().to_string()];
                    row.resize(5, String::new());
                    row
                }
                Err(CliError::Infeasible(_)) => {
                    vec!["all_infeasible".into(), String::new(), String::new(), String::new(), String::new()]
                }
                Err(e) => return Err(e),
            };
            let mut rec = vec![t.to_string(), d.to_string()];
            rec.extend(row);
            w.write_record(rec)?;
        }
    }
    finish(w)
}

pub fn synthesize_command(cfg: &RunConfig) -> Result<(), CliError> {
    synthesize_run(cfg).map(|_| ())
}

/// Shared by `synthesize` and `simulate`: design, verify, write outputs.
fn synthesize_run(cfg: &RunConfig) -> Result<(Problem, SynthesisOutcome), CliError> {
    let mut timing = Timing::new();
    let problem = timing.time("load", || Problem::load(cfg))?;
    if !cfg.sweep_horizons.is_empty() {
        sweep(cfg, &problem, &mut timing)?;
    }
    let result = timing.time("synthesis", || design(cfg, &problem, cfg.horizon, cfg.locality));
    let out = match result {
        Ok(out) => out,
        Err(e @ CliError::Infeasible(_)) => {
            write_all_infeasible(&cfg.out)?;
            timing.write(&cfg.out)?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let check = if out.is_optimal() {
        timing.time("verification", || verify(&problem, &out, cfg))?
    } else {
        None
    };
    write_fir(&cfg.out, "phi_x.csv", &out.phi_x)?;
    write_fir(&cfg.out, "phi_u.csv", &out.phi_u)?;
    write_fir(&cfg.out, "delta.csv", &out.delta)?;
    write_summary(&cfg.out, &out, check.as_ref(), cfg)?;
    write_trace(&cfg.out, &out)?;
    timing.write(&cfg.out)?;
    status_result(&out)?;
    Ok((problem, out))
}

// ------------------------------------------------------------------ simulate

/// Largest absolute state over nodes farther than `d` hops from `source`.
pub fn far_field_peak(
    problem: &Problem,
    traj: &Trajectory,
    source: usize,
    d: usize,
) -> Result<f64, CliError> {
    let dist = problem.distances_from(source)?;
    let far: Vec<usize> = (0..problem.labels.len())
        .filter(|&s| dist[problem.labels[s].0].map_or(true, |h| h > d))
        .collect();
    Ok(traj
        .states
        .iter()
        .flat_map(|x| far.iter().map(move |&s| x[s].abs()))
        .fold(0.0, f64::max))
}

fn run_model(
    cfg: &RunConfig,
    plant: &sparsedisc::DiscretePlant,
    ctrl: &ControllerState,
    entry: usize,
    steps: usize,
) -> Result<Trajectory, CliError> {
    Ok(if cfg.no_disturbance {
        closed_loop(&plant.with_state_disturbance(), ctrl, &[], steps)?
    } else {
        impulse_response(plant, ctrl, entry, steps)?
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let (problem, out) = synthesize_run(cfg)?;
    let node = match cfg.bus {
        Some(b) if b > problem.nodes() => {
            return Err(CliError::Input(format!("bus {b} out of range 1..={}", problem.nodes())))
        }
        Some(b) => b - 1,
        None => problem.default_node,
    };
    let entry = problem.entry_state[node];
    let steps = cfg.steps.unwrap_or(10 * cfg.horizon);
    let ctrl = ControllerState::new(out.phi_x.clone(), out.phi_u.clone())?;

    let mut runs = vec![("nominal", run_model(cfg, &problem.nominal, &ctrl, entry, steps)?)];
    if let Some(dense) = &problem.dense {
        runs.push(("dense", run_model(cfg, dense, &ctrl, entry, steps)?));
    }

    let mut w = csv_file(&cfg.out, "trajectory.csv")?;
    w.write_record(["model", "time", "bus", "state", "value", "log10_abs"])?;
    for (model, traj) in &runs {
        for (k, x) in traj.states.iter().enumerate() {
            for (s, v) in x.iter().enumerate() {
                let (bus, name) = problem.labels[s];
                w.write_record([
                    model.to_string(),
                    k.to_string(),
                    (bus + 1).to_string(),
                    name.to_string(),
                    fmt_f64(*v),
                    fmt_f64(v.abs().log10()),
                ])?;
            }
        }
    }
    finish(w)?;

    let mut w = csv_file(&cfg.out, "response.csv")?;
    w.write_record(["model", "peak", "final_max", "decay_ratio", "far_field_peak", "finite"])?;
    for (model, traj) in &runs {
        let peak = traj.peak();
        let last = traj.states.last().map_or(0.0, DVector::amax);
        let ratio = if peak > 0.0 { last / peak } else { 0.0 };
        let finite = traj.states.iter().all(|x| x.iter().all(|v| v.is_finite()));
        w.write_record([
            model.to_string(),
            fmt_f64(peak),
            fmt_f64(last),
            fmt_f64(ratio),
            fmt_f64(far_field_peak(&problem, traj, node, cfg.locality)?),
            finite.to_string(),
        ])?;
    }
    finish(w)
}
