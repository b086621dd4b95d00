//! Single-branch ("realized") quantum collapse dynamics on finite-dimensional
//! projective state space: Fubini-Study geometry, PVM collapse with
//! deterministic outcome selectors, minimal-energy unitary steering, strong
//! chain search, and finite-precision recurrence certificates.

pub mod chains;
pub mod collapse;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod qstate;
pub mod recurrence;
pub mod sampling;
pub mod steering;
#[cfg(test)]
pub(crate) mod testutil;
pub mod tol;

pub use eigen::{CMatrix, CVector};
pub use chains::{
    chain_cost, grid_refinement_diagnostic, min_cost_search, min_costs_from,
    reversibility_report,
    steer_along_chain, GridScaleReport, NetParams, PairReversibility, StateNet, SteeredRun,
    StrongChain,
};
pub use collapse::{
    apply_collapse, born_weights, label_density_probe, realize_itinerary, step_realized,
    step_skew, ChoiceRule, DensityProbe, Observable, OutcomeLabel, SkewPoint,
};
pub use dynamics::Dynamics;
pub use error::{Error, Result};
pub use steering::{
    perturbation_at, synthesize_steering, verify_steering_by_integration, IntegrationReport,
    SteeringPlan,
};
pub use qstate::{
    evolve, fs_distance, operator_norm, skew_exp, unitary_log, HermitianMatrix, HilbertSpace,
    Propagator, ProjectiveState, UnitaryMatrix,
};
pub use recurrence::{
    certify_recurrence, detect_periodicity, extract_transitive_set, run_stages, LimitEvent,
    RecurrenceCertificate, ScaleLoop, StageBudget, StageKind, StageSequence, Termination,
    TransitiveSetApprox,
};
