use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants map one-to-one onto the failure modes of
/// the construction and search operations; all carry enough context to
/// diagnose the offending input.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("matrix is not Hermitian: residual {residual:.3e} exceeds {tolerance:.1e}")]
    Hermiticity { residual: f64, tolerance: f64 },

    #[error("matrix is not unitary: residual {residual:.3e} exceeds {tolerance:.1e}")]
    Unitarity { residual: f64, tolerance: f64 },

    #[error("state vector has near-zero norm {norm:.3e}")]
    ZeroVector { norm: f64 },

    #[error("state norm {norm} is not 1 within {tolerance:.1e}")]
    Normalization { norm: f64, tolerance: f64 },

    #[error("invalid observable: {reason}")]
    Observable { reason: String },

    #[error("unitary-log eigenphase {phase} lies within {margin:.1e} of the -pi branch cut; perturb the input")]
    BranchAmbiguity { phase: f64, margin: f64 },

    #[error("outcome {label} has Born amplitude {norm:.3e} below the zero-weight threshold")]
    ZeroBornWeight { label: usize, norm: f64 },

    #[error("choice rule selected inadmissible outcome {label} (Born amplitude {norm:.3e})")]
    Admissibility { label: usize, norm: f64 },

    #[error("steering target at Fubini-Study angle {delta} is too close to orthogonal (limit {limit})")]
    NearOrthogonal { delta: f64, limit: f64 },

    #[error("invalid steering times: need 0 < t0 <= t < t1, got ({tau0}, {tau}, {tau1})")]
    TimeOrder { tau0: f64, tau: f64, tau1: f64 },

    #[error("time {t} outside steering window [{lo}, {hi}]")]
    Window { t: f64, lo: f64, hi: f64 },

    #[error("no path from node {from_node} to node {to_node} under cost cap {cap:?}")]
    Infeasible {
        from_node: usize,
        to_node: usize,
        cap: Option<f64>,
    },

    #[error("budget exhausted: {what}")]
    Budget { what: String },

    #[error("no bucket of radius {radius} reached {needed} visits (best {best}); raise the orbit budget")]
    Stagnation {
        radius: f64,
        needed: usize,
        best: usize,
    },

    #[error("set closure exceeded size cap {cap}")]
    SizeCap { cap: usize },

    #[error("{0}")]
    InvalidInput(String),
}
