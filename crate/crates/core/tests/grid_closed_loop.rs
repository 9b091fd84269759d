//! The 57-bus design chain: synthesize on the projected model, check the
//! residual against the dense model, then simulate both.

use std::sync::OnceLock;

use sparsedisc::sim::{check_robust_stability, impulse_response, ControllerState, Trajectory};
use sparsedisc::sls::{
    sls_residual, synthesize, DeltaConstraint, NormKind, SolverSettings, SynthesisOutcome,
    SynthesisStatus,
};
use sparsedisc::{case57_topology, GridModels, CASE57_DISTURBED_BUS};

const TAU: f64 = 0.2;
const HORIZON: usize = 5;
const LOCALITY: usize = 4;

struct Design {
    models: GridModels,
    outcome: SynthesisOutcome,
}

fn design() -> &'static Design {
    static CELL: OnceLock<Design> = OnceLock::new();
    CELL.get_or_init(|| {
        let models = GridModels::new(&case57_topology().unwrap(), TAU).unwrap();
        let loc = models.locality(LOCALITY, HORIZON).unwrap();
        let outcome = synthesize(
            &models.nominal,
            &loc,
            0.0,
            DeltaConstraint::Residual(NormKind::L1),
            &SolverSettings::default(),
        )
        .unwrap();
        Design { models, outcome }
    })
}

fn run(on_dense: bool, steps: usize) -> Trajectory {
    let d = design();
    let plant = if on_dense { &d.models.dense } else { &d.models.nominal };
    let ctrl = ControllerState::new(d.outcome.phi_x.clone(), d.outcome.phi_u.clone()).unwrap();
    let j = d.models.map.omega(CASE57_DISTURBED_BUS - 1).unwrap();
    impulse_response(plant, &ctrl, j, steps).unwrap()
}

#[test]
fn synthesis_is_optimal_on_sparse_model() {
    let d = design();
    assert_eq!(d.outcome.status, SynthesisStatus::Optimal);
    let delta = sls_residual(
        &d.models.nominal.a,
        &d.models.nominal.b2,
        &d.outcome.phi_x,
        &d.outcome.phi_u,
    )
    .unwrap();
    assert!(delta.l1_norm() <= 1e-6, "nominal residual {}", delta.l1_norm());
}

#[test]
fn dense_residual_is_stable() {
    let d = design();
    let delta =
        sls_residual(&d.models.dense.a, &d.models.dense.b2, &d.outcome.phi_x, &d.outcome.phi_u)
            .unwrap();
    let report = check_robust_stability(&delta).unwrap();
    assert!(report.stable, "spectral radius {}", report.spectral_radius);
}

#[test]
fn dense_impulse_decays() {
    let traj = run(true, 10 * HORIZON);
    let peak = traj.peak();
    assert!(peak.is_finite() && peak > 0.0);
    let last = traj.states.last().unwrap().amax();
    assert!(last <= 1e-6 * peak, "final {last:e}, peak {peak:e}");
}

#[test]
fn nominal_response_is_localized() {
    let d = design();
    let dist = d.models.bus_distances().unwrap();
    let src = CASE57_DISTURBED_BUS - 1;
    let traj = run(false, 10 * HORIZON);
    let mut far = 0;
    for bus in 0..d.models.map.buses() {
        if dist[src][bus].map_or(true, |h| h <= LOCALITY) {
            continue;
        }
        far += 1;
        let mut states = vec![d.models.map.theta(bus)];
        states.extend(d.models.map.omega(bus));
        for x in &traj.states {
            for &s in &states {
                assert!(x[s].abs() <= 1e-10, "bus {} state {s}: {:e}", bus + 1, x[s]);
            }
        }
    }
    assert!(far > 0, "no bus lies outside the locality radius");
}

#[test]
fn nominal_response_is_fir() {
    let traj = run(false, 3 * HORIZON);
    for x in &traj.states[HORIZON + 1..] {
        assert!(x.amax() <= 1e-8);
    }
}
