//! FIR system responses, their norms, locality, robustness bounds and
//! synthesis.

pub mod fir;
pub mod locality;
pub mod robust;
mod solver;
pub mod synth;

pub use fir::{FirTransfer, MIN_HINF_GRID};
pub use locality::{hop_distances, locality_mask, LocalityConstraint};
pub use robust::{
    robust_bound, robust_bound_e1, robust_bound_hinf, robust_bound_l1, sls_residual, NormKind,
    RobustnessBudget,
};
pub use solver::SolverSettings;
pub use synth::{
    synthesize, synthesize_bisect, synthesize_columns, BisectionStep, DeltaConstraint,
    SynthesisOutcome, SynthesisStatus,
};
