//! Sparsity-preserving discretization of continuous-time linear systems,
//! a-priori bounds on the discretization error, and localized robust
//! state-feedback synthesis on the resulting sparse models.

pub mod bounds;
pub mod discretize;
pub mod error;
pub mod grid;
pub mod matexp;
pub mod matrix;
pub mod sim;
pub mod sls;

pub use bounds::{
    band_extract, bandwidth, delta_norm_bounds, empirical_delta, iserles_entry_bound,
    truncation_bound, BandedProfile, DeltaBounds,
};
pub use discretize::{
    discretize_all, drift_mask, input_mask, project_a, project_b, support, truncate_first_order,
    tustin, unit_weights, ContinuousPlant, DiscretePlant, Method,
};
pub use error::{Error, Result};
pub use matexp::{expm, zoh_pair, DEFAULT_ACCURACY};
pub use matrix::{matrix_norm, DenseMatrix, MatrixNormKind, SupportMask};
pub use grid::{
    case57_topology, linearize, parse_topology, GridIndexMap, GridModels, GridSpec,
    CASE57_DISTURBED_BUS,
};
pub use sim::{
    check_robust_stability, closed_loop, controller_step, impulse_response, ControllerState,
    StabilityReport, Trajectory,
};
pub use sls::{
    synthesize, synthesize_bisect, synthesize_columns, DeltaConstraint, FirTransfer,
    LocalityConstraint, NormKind, RobustnessBudget, SolverSettings, SynthesisOutcome,
    SynthesisStatus,
};
