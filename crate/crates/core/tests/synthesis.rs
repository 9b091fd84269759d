use nalgebra::{dmatrix, DMatrix};
use sparsedisc::sls::{
    locality_mask, robust_bound, sls_residual, synthesize, synthesize_bisect, synthesize_columns,
    DeltaConstraint, LocalityConstraint, NormKind, RobustnessBudget, SolverSettings,
    SynthesisStatus,
};
use sparsedisc::{DiscretePlant, Error, SupportMask};

/// Optimal cost of the chain instance below at gamma = 0.2, from an
/// interior-point conic solver run offline.
const CHAIN_L1_REFERENCE: f64 = 8.828474979763158;
/// Same instance at gamma = 0 from the same solver.
const CHAIN_EXACT_REFERENCE: f64 = 9.935733068985245;

fn chain(n: usize) -> DiscretePlant {
    let a = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 0.8,
        1 => 0.4,
        _ => 0.0,
    });
    DiscretePlant::with_unit_weights(a, DMatrix::identity(n, n), DMatrix::identity(n, n), 1.0)
        .unwrap()
}

fn path_locality(n: usize, d: usize, t: usize) -> LocalityConstraint {
    let adj = SupportMask::from_fn(n, n, |i, j| i.abs_diff(j) <= 1);
    locality_mask(&adj, &SupportMask::identity(n), d, t).unwrap()
}

fn l1() -> DeltaConstraint {
    DeltaConstraint::Residual(NormKind::L1)
}

#[test]
fn deadbeat_is_unique_point() {
    let n = 3;
    let plant = DiscretePlant::with_unit_weights(
        DMatrix::zeros(n, n),
        DMatrix::identity(n, n),
        DMatrix::identity(n, n),
        1.0,
    )
    .unwrap();
    let out = synthesize(&plant, &LocalityConstraint::full(n, n, 1), 0.0, l1(), &SolverSettings::default())
        .unwrap();
    assert_eq!(out.status, SynthesisStatus::Optimal);
    assert!((out.cost - n as f64).abs() < 1e-12);
    assert!(out.phi_u.component(1).amax() < 1e-12);
}

#[test]
fn scalar_example_matches_brute_force() {
    let plant = DiscretePlant::with_unit_weights(dmatrix![0.5], dmatrix![1.0], dmatrix![1.0], 1.0)
        .unwrap();
    let out = synthesize(&plant, &LocalityConstraint::full(1, 1, 2), 0.0, l1(), &SolverSettings::default())
        .unwrap();
    assert_eq!(out.status, SynthesisStatus::Optimal);
    // Delta = 0 forces Phi_x[2] = 0.5 + phi and Phi_u[2] = -0.5 Phi_x[2].
    let cost = |phi: f64| {
        let x2: f64 = 0.5 + phi;
        1.0 + phi * phi + x2 * x2 * 1.25
    };
    let mut best = f64::INFINITY;
    let steps = 400_000;
    for k in 0..=steps {
        best = best.min(cost(-2.0 + 4.0 * k as f64 / steps as f64));
    }
    assert!((out.cost - best).abs() < 1e-6, "{} vs {}", out.cost, best);
    assert!(out.delta.l1_norm() < 1e-12);
}

#[test]
fn chain_l1_matches_reference_solver() {
    let plant = chain(6);
    let loc = path_locality(6, 1, 4);
    let out = synthesize(&plant, &loc, 0.2, l1(), &SolverSettings::default()).unwrap();
    assert_eq!(out.status, SynthesisStatus::Optimal, "{:?}", out.certificate);
    let rel = (out.cost - CHAIN_L1_REFERENCE).abs() / CHAIN_L1_REFERENCE;
    assert!(rel < 1e-4, "cost {} vs {}", out.cost, CHAIN_L1_REFERENCE);
    assert!(out.delta.l1_norm() <= 0.2 + 1e-6);
}

#[test]
fn chain_exact_matches_reference_solver() {
    let plant = chain(6);
    let loc = path_locality(6, 1, 4);
    let out = synthesize(&plant, &loc, 0.0, l1(), &SolverSettings::default()).unwrap();
    assert_eq!(out.status, SynthesisStatus::Optimal);
    assert!((out.cost - CHAIN_EXACT_REFERENCE).abs() / CHAIN_EXACT_REFERENCE < 1e-8);
    assert!(out.delta.l1_norm() < 1e-8);
}

#[test]
fn masks_are_respected_exactly() {
    let plant = chain(6);
    let loc = path_locality(6, 1, 4);
    let out = synthesize(&plant, &loc, 0.2, l1(), &SolverSettings::default()).unwrap();
    for k in 1..=4 {
        for i in 0..6 {
            for j in 0..6 {
                if !loc.x_mask(k).get(i, j) {
                    assert_eq!(out.phi_x.component(k)[(i, j)], 0.0);
                }
                if !loc.u_mask(k).get(i, j) {
                    assert_eq!(out.phi_u.component(k)[(i, j)], 0.0);
                }
            }
        }
    }
}

#[test]
fn residual_round_trip() {
    let plant = chain(6);
    let loc = path_locality(6, 2, 5);
    let out = synthesize(&plant, &loc, 0.0, l1(), &SolverSettings::default()).unwrap();
    let d = sls_residual(&plant.a, &plant.b2, &out.phi_x, &out.phi_u).unwrap();
    assert!(d.l1_norm() <= 1e-8);
}

fn two_node() -> (DiscretePlant, LocalityConstraint) {
    let a = dmatrix![0.2, 0.1; 0.1, 0.2];
    let b2 = dmatrix![1.0; 0.0];
    let plant = DiscretePlant::with_unit_weights(a, DMatrix::identity(2, 2), b2, 1.0).unwrap();
    let mut act = SupportMask::empty(1, 2);
    act.set(0, 0, true);
    let adj = SupportMask::full(2, 2);
    let loc = locality_mask(&adj, &act, 0, 1).unwrap();
    (plant, loc)
}

#[test]
fn two_node_feasibility_threshold() {
    // Row 2 of Delta[1] is fixed at |0.1| + |0.2|: the smallest feasible cap
    // is 0.3. Sweep the inner problem over a 0.01 grid.
    let (plant, loc) = two_node();
    let settings = SolverSettings::default();
    for k in 1..100 {
        let gamma = k as f64 / 100.0;
        let out = synthesize(&plant, &loc, gamma, l1(), &settings).unwrap();
        if gamma < 0.3 - 1e-12 {
            assert_ne!(out.status, SynthesisStatus::Optimal, "gamma {gamma}");
        } else if gamma > 0.3 + 1e-12 {
            assert_eq!(out.status, SynthesisStatus::Optimal, "gamma {gamma}");
        }
    }
}

#[test]
fn bisection_finds_interior_gamma() {
    let (plant, loc) = two_node();
    let out = synthesize_bisect(&plant, &loc, l1(), 1e-3, &SolverSettings::default()).unwrap();
    assert_eq!(out.status, SynthesisStatus::Optimal);
    assert!(out.gamma > 0.3 && out.gamma < 1.0, "gamma {}", out.gamma);
    assert!(out.delta.l1_norm() < out.gamma);
    assert!(out.trace.len() <= 10);
    assert!(out.trace.iter().all(|s| s.gamma < 0.3 || s.status == SynthesisStatus::Optimal
        || s.gamma - 0.3 < 1e-3));
}

#[test]
fn bisection_keeps_exact_solution_when_reachable() {
    let plant = chain(6);
    let loc = path_locality(6, 2, 5);
    let out = synthesize_bisect(&plant, &loc, l1(), 1e-2, &SolverSettings::default()).unwrap();
    assert_eq!(out.status, SynthesisStatus::Optimal);
    assert_eq!(out.trace[0].gamma, 0.0);
    assert_eq!(out.trace[0].status, SynthesisStatus::Optimal);
    // The merit of the reported point is never worse than the exact design.
    assert!(out.merit() <= out.trace[0].cost + 1e-9);
}

#[test]
fn missing_identity_entry() {
    let plant = chain(3);
    let x = SupportMask::from_fn(3, 3, |i, j| i != j);
    let loc = LocalityConstraint::new(vec![x], vec![SupportMask::full(3, 3)]).unwrap();
    let err = synthesize(&plant, &loc, 0.0, l1(), &SolverSettings::default()).unwrap_err();
    assert!(matches!(err, Error::MaskIdentityConflict(0)));
    let err = synthesize_bisect(&plant, &loc, l1(), 1e-2, &SolverSettings::default()).unwrap_err();
    assert_eq!(err, Error::AllInfeasible);
}

#[test]
fn nothing_feasible_reports_all_infeasible() {
    // No actuation and unit-diagonal drift: every row of Delta[1] has l1 >= 1.
    let plant = DiscretePlant::with_unit_weights(
        DMatrix::identity(2, 2),
        DMatrix::identity(2, 2),
        DMatrix::zeros(2, 1),
        1.0,
    )
    .unwrap();
    let loc = LocalityConstraint::new(
        vec![SupportMask::identity(2)],
        vec![SupportMask::empty(1, 2)],
    )
    .unwrap();
    let err = synthesize_bisect(&plant, &loc, l1(), 1e-2, &SolverSettings::default()).unwrap_err();
    assert_eq!(err, Error::AllInfeasible);
}

#[test]
fn e1_columns_match_joint_solve() {
    let plant = chain(6);
    let loc = path_locality(6, 1, 4);
    let e1 = DeltaConstraint::Residual(NormKind::E1);
    let settings = SolverSettings::default();
    let joint = synthesize(&plant, &loc, 0.25, e1, &settings).unwrap();
    let split = synthesize_columns(&plant, &loc, 0.25, e1, &settings).unwrap();
    assert_eq!(joint.status, SynthesisStatus::Optimal);
    assert_eq!(split.status, SynthesisStatus::Optimal);
    let rel = (joint.cost - split.cost).abs() / joint.cost;
    assert!(rel < 1e-6, "{} vs {}", joint.cost, split.cost);
    assert!(synthesize_columns(&plant, &loc, 0.25, l1(), &settings).is_err());
}

#[test]
fn hinf_cap_is_respected() {
    let plant = chain(4);
    let loc = path_locality(4, 1, 3);
    let hinf = DeltaConstraint::Residual(NormKind::HinfSampled { grid_points: 64 });
    let out = synthesize(&plant, &loc, 0.5, hinf, &SolverSettings::default()).unwrap();
    assert_eq!(out.status, SynthesisStatus::Optimal, "{:?}", out.certificate);
    assert!(out.delta.hinf_norm_sampled(64).unwrap() <= 0.5 + 1e-6);
    // Loosening the cap cannot raise the optimal cost.
    let exact = synthesize(&plant, &loc, 0.0, hinf, &SolverSettings::default()).unwrap();
    assert!(out.cost <= exact.cost + 1e-6);
}

#[test]
fn model_error_budget_bounds_hold() {
    let plant = chain(4);
    let loc = path_locality(4, 1, 4);
    for norm in [NormKind::L1, NormKind::E1, NormKind::HinfSampled { grid_points: 64 }] {
        let budget = RobustnessBudget::new(norm, 0.05, 0.05, 0.5).unwrap();
        let out = synthesize(
            &plant,
            &loc,
            0.6,
            DeltaConstraint::ModelError(budget),
            &SolverSettings::default(),
        )
        .unwrap();
        assert_eq!(out.status, SynthesisStatus::Optimal, "{}", norm.name());
        assert!(out.delta.l1_norm() < 1e-8, "design plant must be met exactly");
        let bound = robust_bound(&out.phi_x, &out.phi_u, &budget).unwrap();
        assert!(bound <= 0.6 + 1e-6, "{} bound {bound}", norm.name());
    }
}

#[test]
fn model_error_bisection_picks_alpha() {
    let plant = chain(4);
    let loc = path_locality(4, 1, 4);
    let budget = RobustnessBudget::new(NormKind::L1, 0.05, 0.05, 0.5).unwrap();
    let out = synthesize_bisect(
        &plant,
        &loc,
        DeltaConstraint::ModelError(budget),
        0.05,
        &SolverSettings::default(),
    )
    .unwrap();
    assert_eq!(out.status, SynthesisStatus::Optimal);
    let alpha = out.alpha.unwrap();
    assert!((0.1..=0.9).contains(&alpha));
    let bound = robust_bound(&out.phi_x, &out.phi_u, &budget.with_alpha(alpha)).unwrap();
    assert!(bound <= out.gamma + 1e-6);
}

#[test]
fn argument_checks() {
    let plant = chain(3);
    let loc = path_locality(3, 1, 2);
    let s = SolverSettings::default();
    assert!(synthesize(&plant, &loc, 1.0, l1(), &s).is_err());
    assert!(synthesize(&plant, &loc, -0.1, l1(), &s).is_err());
    assert!(synthesize_bisect(&plant, &loc, l1(), 0.0, &s).is_err());
    let wrong = path_locality(4, 1, 2);
    assert!(matches!(
        synthesize(&plant, &wrong, 0.0, l1(), &s),
        Err(Error::DimensionMismatch(_))
    ));
    let coarse = DeltaConstraint::Residual(NormKind::HinfSampled { grid_points: 16 });
    assert!(synthesize(&plant, &loc, 0.1, coarse, &s).is_err());
}
