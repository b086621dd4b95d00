//! Report DTOs and writers. Complex matrices and states serialize as nested
//! arrays of [re, im] pairs; all containers have a fixed field order, so a
//! rerun with identical seeds produces byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use branchsim::{
    CMatrix, GridScaleReport, IntegrationReport, OutcomeLabel, PairReversibility,
    ProjectiveState, RecurrenceCertificate, SteeredRun, SteeringPlan, StrongChain,
};
use serde::Serialize;

use crate::error::CliError;

pub type ComplexPairs = Vec<[f64; 2]>;
pub type MatrixPairs = Vec<ComplexPairs>;

pub fn matrix_json(m: &CMatrix) -> MatrixPairs {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

pub fn state_json(s: &ProjectiveState) -> ComplexPairs {
    s.amplitudes().iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Serialize)]
pub struct PlanJson {
    pub window: [f64; 2],
    pub start_time: f64,
    pub delta: f64,
    pub cost: f64,
    pub closed_form_residual: f64,
    pub rotation_generator: MatrixPairs,
    pub h_tilde: MatrixPairs,
}

impl PlanJson {
    pub fn from_plan(plan: &SteeringPlan) -> Self {
        Self {
            window: [plan.window().0, plan.window().1],
            start_time: plan.start_time(),
            delta: plan.delta(),
            cost: plan.cost(),
            closed_form_residual: plan.closed_form_residual(),
            rotation_generator: matrix_json(plan.rotation()),
            h_tilde: matrix_json(plan.h_tilde().entries()),
        }
    }
}

#[derive(Serialize)]
pub struct VerificationJson {
    pub steps: usize,
    pub target_error: f64,
    pub propagator_error: f64,
    pub integrated_cost: f64,
}

impl VerificationJson {
    pub fn from_report(steps: usize, r: &IntegrationReport) -> Self {
        Self {
            steps,
            target_error: r.target_error,
            propagator_error: r.propagator_error,
            integrated_cost: r.integrated_cost,
        }
    }
}

#[derive(Serialize)]
pub struct ChainJson {
    pub epsilon: f64,
    pub total_cost: f64,
    pub jump_costs: Vec<f64>,
    pub points: Vec<ComplexPairs>,
}

impl ChainJson {
    pub fn from_chain(chain: &StrongChain) -> Self {
        Self {
            epsilon: chain.epsilon(),
            total_cost: chain.total_cost(),
            jump_costs: chain.jump_costs().to_vec(),
            points: chain.points().iter().map(state_json).collect(),
        }
    }
}

#[derive(Serialize)]
pub struct ScaleLoopJson {
    pub scale: f64,
    pub certified: bool,
    pub loop_len: Option<usize>,
    pub loop_cost: Option<f64>,
    /// Full loop chain (points and jump costs), when the scale certified.
    pub chain: Option<ChainJson>,
}

#[derive(Serialize)]
pub struct CertificateJson {
    pub base: ComplexPairs,
    pub base_index: usize,
    pub base_visits: usize,
    pub nested: bool,
    pub scales: Vec<ScaleLoopJson>,
}

impl CertificateJson {
    pub fn from_certificate(cert: &RecurrenceCertificate) -> Self {
        Self {
            base: state_json(cert.base()),
            base_index: cert.base_index(),
            base_visits: cert.base_visits(),
            nested: cert.nested(),
            scales: cert
                .loops()
                .iter()
                .map(|l| ScaleLoopJson {
                    scale: l.scale,
                    certified: l.chain.is_some(),
                    loop_len: l.chain.as_ref().map(|c| c.len()),
                    loop_cost: l.chain.as_ref().map(|c| c.total_cost()),
                    chain: l.chain.as_ref().map(ChainJson::from_chain),
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
pub struct TransitiveSetJson {
    pub scale: f64,
    pub member_count: usize,
    pub invariance_defect: f64,
    pub max_pairwise_cost: f64,
    pub members: Vec<ComplexPairs>,
    pub pairwise_costs: Vec<Vec<f64>>,
}

impl TransitiveSetJson {
    pub fn from_set(set: &branchsim::TransitiveSetApprox) -> Self {
        Self {
            scale: set.scale(),
            member_count: set.members().len(),
            invariance_defect: set.invariance_defect(),
            max_pairwise_cost: set.max_pairwise_cost(),
            members: set.members().iter().map(state_json).collect(),
            pairwise_costs: set.pairwise_costs().to_vec(),
        }
    }
}

#[derive(Serialize)]
pub struct PairJson {
    pub forward_node: usize,
    pub backward_node: usize,
    pub snap_errors: [f64; 2],
    pub forward_cost: f64,
    pub backward_cost: f64,
    pub symmetric: bool,
}

impl PairJson {
    pub fn from_pair(p: &PairReversibility) -> Self {
        Self {
            forward_node: p.forward_node,
            backward_node: p.backward_node,
            snap_errors: [p.snap_errors.0, p.snap_errors.1],
            forward_cost: p.forward_cost,
            backward_cost: p.backward_cost,
            symmetric: p.symmetric,
        }
    }
}

#[derive(Serialize)]
pub struct GridScaleJson {
    pub scale: f64,
    pub first_visit: usize,
    pub second_visit: usize,
    pub return_gap: f64,
    pub nests_previous: bool,
    pub center: ComplexPairs,
}

impl GridScaleJson {
    pub fn from_report(r: &GridScaleReport) -> Self {
        Self {
            scale: r.scale,
            first_visit: r.first_visit,
            second_visit: r.second_visit,
            return_gap: r.return_gap,
            nests_previous: r.nests_previous,
            center: state_json(&r.center),
        }
    }
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serializing {name}: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    Ok(path)
}

/// states.csv: step, canonical amplitudes, outcome label of the step taken
/// from that state (empty on the final row).
pub fn states_csv(states: &[ProjectiveState], itinerary: &[OutcomeLabel]) -> String {
    let dim = states.first().map_or(0, |s| s.dim());
    let mut out = String::from("step");
    for k in 0..dim {
        let _ = write!(out, ",amp{k}_re,amp{k}_im");
    }
    out.push_str(",label\n");
    for (step, state) in states.iter().enumerate() {
        let _ = write!(out, "{step}");
        for z in state.amplitudes().iter() {
            let _ = write!(out, ",{},{}", z.re, z.im);
        }
        match itinerary.get(step) {
            Some(label) => {
                let _ = writeln!(out, ",{}", label.value());
            }
            None => out.push_str(",\n"),
        }
    }
    out
}

/// chain.csv: one row per step with its jump cost and, when steered, the
/// plan's angle and window.
pub fn chain_csv(chain: &StrongChain, run: Option<&SteeredRun>) -> String {
    let mut out = String::from("index,jump_cost,plan_delta,window_lo,window_hi\n");
    for (i, cost) in chain.jump_costs().iter().enumerate() {
        match run.map(|r| &r.plans()[i]) {
            Some(plan) => {
                let _ = writeln!(
                    out,
                    "{i},{cost},{},{},{}",
                    plan.delta(),
                    plan.window().0,
                    plan.window().1
                );
            }
            None => {
                let _ = writeln!(out, "{i},{cost},,,");
            }
        }
    }
    out
}

/// certificate.csv: scale, loop length, loop cost, nested flag.
pub fn certificate_csv(cert: &RecurrenceCertificate) -> String {
    let mut out = String::from("scale,loop_len,loop_cost,nested\n");
    for l in cert.loops() {
        match &l.chain {
            Some(chain) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    l.scale,
                    chain.len(),
                    chain.total_cost(),
                    cert.nested()
                );
            }
            None => {
                let _ = writeln!(out, "{},,,{}", l.scale, cert.nested());
            }
        }
    }
    out
}

/// grid.csv: one row per scale.
pub fn grid_csv(reports: &[GridScaleReport]) -> String {
    let mut out = String::from("scale,first_visit,second_visit,return_gap,nests_previous\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.scale, r.first_visit, r.second_visit, r.return_gap, r.nests_previous
        );
    }
    out
}
