//! Validation tolerances used across the crate.
//!
//! Construction invariants are checked against these fixed thresholds; search
//! and verification routines take their tolerances as parameters instead.

/// Unit-norm check on state vectors. Exact arithmetic would give 0; 1e-12
/// leaves room for a handful of rounding steps in caller-side preparation.
pub const UNIT_NORM: f64 = 1e-12;

/// Hermiticity residual max|M - M†|.
pub const HERMITICITY: f64 = 1e-12;

/// Unitarity residual max|U†U - I|. Products of eigendecomposition factors
/// accumulate slightly more rounding than a single validation pass.
pub const UNITARITY: f64 = 1e-10;

/// Projector family residuals (idempotence, orthogonality, completeness).
pub const PVM: f64 = 1e-10;

/// Born amplitude ||P_j U u|| at or below this counts as kernel membership;
/// the outcome is inadmissible there.
pub const ZERO_WEIGHT_NORM: f64 = 1e-12;

/// Unitary-log eigenphases within this margin of the -pi branch cut are
/// rejected rather than silently assigned a branch.
pub const BRANCH_MARGIN: f64 = 1e-12;

/// Fubini-Study angles this close to pi/2 make the steering generator's
/// denominator degenerate; synthesis refuses them.
pub const NEAR_ORTHOGONAL_MARGIN: f64 = 1e-9;

/// Distance below which two states count as an exact orbit revisit. Kept far
/// below every search scale so periodicity and recurrence stay distinct.
pub const EXACT_REVISIT: f64 = 1e-10;
