//! Scenario files: a single JSON document declaring the Hilbert space, the
//! ambient Hamiltonian, the observable, the choice rule, and the experiment
//! parameters. Matrices are nested arrays of [re, im] pairs.

use std::path::{Path, PathBuf};

use branchsim::{
    CMatrix, CVector, ChoiceRule, Dynamics, HermitianMatrix, NetParams, Observable, OutcomeLabel,
    ProjectiveState, StageBudget, StateNet, UnitaryMatrix,
};
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub hilbert_dim: usize,
    pub hamiltonian: Vec<Vec<[f64; 2]>>,
    pub observable: ObservableSpec,
    pub choice_rule: RuleSpec,
    #[serde(default)]
    pub net: Option<NetSpec>,
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
    #[serde(default)]
    pub budgets: BudgetSpec,
    #[serde(default)]
    pub recurrence: RecurrenceSpec,
    #[serde(default)]
    pub pairs: Vec<[StateSpec; 2]>,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_scales() -> Vec<f64> {
    vec![0.1, 0.05]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    Projectors {
        projectors: Vec<Vec<Vec<[f64; 2]>>>,
        eigenvalues: Vec<f64>,
    },
    Eigenbasis {
        eigenbasis: Vec<Vec<[f64; 2]>>,
        partition: Vec<Vec<usize>>,
        eigenvalues: Vec<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleSpec {
    BlankOnly,
    BornGreedy,
    HashedBorn {
        seed: u64,
        #[serde(default = "default_blank_prob")]
        blank_prob: f64,
    },
    Table {
        states: Vec<StateSpec>,
        labels: Vec<usize>,
        #[serde(default = "default_match_radius")]
        match_radius: f64,
    },
}

fn default_blank_prob() -> f64 {
    0.5
}

fn default_match_radius() -> f64 {
    1e-8
}

/// A state literal: either a basis shorthand ("e0", "e1", ...) or an explicit
/// amplitude vector of [re, im] pairs.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Basis(String),
    Amplitudes(Vec<[f64; 2]>),
}

/// Either a sampled net or an explicit node list (for hand-built toys whose
/// structure random sampling would miss).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NetSpec {
    Sampled {
        node_count: usize,
        thinning_radius: f64,
        seed: u64,
    },
    Explicit {
        nodes: Vec<StateSpec>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSpec {
    /// Length of each recurrence orbit stage.
    pub orbit_len: usize,
    pub max_limit_stages: usize,
    /// Periodicity detection horizon.
    pub horizon: usize,
    /// Orbit steps per scale in the grid diagnostic.
    pub grid_budget: usize,
    /// Member cap for transitive-set closure.
    pub size_cap: usize,
    /// Optional cost cap for chain searches.
    pub cost_cap: Option<f64>,
    /// Maximum number of jumps accepted in a reported chain.
    pub path_cap: Option<usize>,
    /// Integration steps for steering verification.
    pub verify_steps: usize,
}

impl Default for BudgetSpec {
    fn default() -> Self {
        Self {
            orbit_len: 10_000,
            max_limit_stages: 2,
            horizon: 1000,
            grid_budget: 200_000,
            size_cap: 500,
            cost_cap: None,
            path_cap: None,
            verify_steps: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecurrenceSpec {
    pub bucket_radius: f64,
    pub m_min: usize,
}

impl Default for RecurrenceSpec {
    fn default() -> Self {
        Self {
            bucket_radius: 0.025,
            m_min: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSpec {
    /// Flag threshold for closed-form steering residuals in reports.
    pub steering_residual: f64,
    /// Flag threshold for chain revalidation gaps in reports.
    pub chain_revalidation: f64,
    /// Minimal forward/backward gap that counts as an arrow of time.
    pub asymmetry_margin: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            steering_residual: 1e-9,
            chain_revalidation: 1e-9,
            asymmetry_margin: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Which artifact kinds to write; JSON reports are always written.
    pub formats: Vec<String>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec!["json".into(), "csv".into()],
        }
    }
}

/// A resolved net declaration.
pub enum NetConfig {
    Sampled(NetParams),
    Explicit(Vec<ProjectiveState>),
}

/// A loaded scenario: validated core objects plus experiment parameters.
pub struct Scenario {
    pub dim: usize,
    pub dynamics: Dynamics,
    pub net: Option<NetConfig>,
    pub scales: Vec<f64>,
    pub budgets: BudgetSpec,
    pub recurrence: RecurrenceSpec,
    pub pairs: Vec<(ProjectiveState, ProjectiveState)>,
    pub tolerances: ToleranceSpec,
    pub output_dir: PathBuf,
    pub csv_enabled: bool,
}

impl Scenario {
    /// Loads and validates a scenario file. `seed_override` replaces both the
    /// hashed-born seed and the net seed when given.
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: ScenarioFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_file(file, seed_override)
    }

    pub fn from_file(file: ScenarioFile, seed_override: Option<u64>) -> Result<Self, CliError> {
        let dim = file.hilbert_dim;
        if dim < 2 {
            return Err(CliError::Config(format!(
                "hilbert_dim must be at least 2, got {dim}"
            )));
        }
        let hamiltonian = HermitianMatrix::new(parse_matrix(&file.hamiltonian, dim, "hamiltonian")?)
            .map_err(|e| CliError::Config(format!("hamiltonian: {e}")))?;
        let observable = build_observable(&file.observable, dim)?;
        let rule = build_rule(&file.choice_rule, dim, observable.num_outcomes(), seed_override)?;
        let dynamics = Dynamics::new(hamiltonian, observable, rule)
            .map_err(|e| CliError::Config(e.to_string()))?;

        let net = file
            .net
            .as_ref()
            .map(|spec| -> Result<NetConfig, CliError> { match spec {
                NetSpec::Sampled {
                    node_count,
                    thinning_radius,
                    seed,
                } => {
                    let seed = seed_override.unwrap_or(*seed);
                    Ok(NetConfig::Sampled(NetParams::new(
                        *node_count,
                        *thinning_radius,
                        seed,
                    )))
                }
                NetSpec::Explicit { nodes } => {
                    let states = nodes
                        .iter()
                        .map(|n| state_from_spec(n, dim))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(NetConfig::Explicit(states))
                }
            }})
            .transpose()?;

        for pair in file.scales.windows(2) {
            if pair[1].is_nan() || pair[0].is_nan() || pair[1] >= pair[0] {
                return Err(CliError::Config(
                    "scales must be strictly decreasing".into(),
                ));
            }
        }
        if file.scales.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return Err(CliError::Config("scales must be positive".into()));
        }

        let pairs = file
            .pairs
            .iter()
            .map(|[a, b]| {
                Ok((
                    state_from_spec(a, dim)?,
                    state_from_spec(b, dim)?,
                ))
            })
            .collect::<Result<Vec<_>, CliError>>()?;

        Ok(Self {
            dim,
            dynamics,
            net,
            scales: file.scales,
            budgets: file.budgets,
            recurrence: file.recurrence,
            pairs,
            tolerances: file.tolerances,
            csv_enabled: file.output.formats.iter().any(|f| f == "csv"),
            output_dir: file.output.dir,
        })
    }

    /// Builds the scenario's net, if one is declared.
    pub fn build_net(&self) -> Result<Option<StateNet>, CliError> {
        match &self.net {
            None => Ok(None),
            Some(NetConfig::Sampled(params)) => {
                Ok(Some(StateNet::sample(&self.dynamics, params)?))
            }
            Some(NetConfig::Explicit(states)) => Ok(Some(StateNet::from_states(
                &self.dynamics,
                states.clone(),
            )?)),
        }
    }

    pub fn stage_budget(&self) -> StageBudget {
        StageBudget {
            orbit_len: self.budgets.orbit_len,
            max_limit_stages: self.budgets.max_limit_stages,
        }
    }

    /// Parses a CLI state argument: `e<k>` or a JSON array of `[re, im]` pairs.
    pub fn parse_state(&self, text: &str) -> Result<ProjectiveState, CliError> {
        parse_state_text(text, self.dim)
    }
}

pub fn parse_state_text(text: &str, dim: usize) -> Result<ProjectiveState, CliError> {
    let trimmed = text.trim();
    if let Some(index) = trimmed.strip_prefix('e') {
        if let Ok(k) = index.parse::<usize>() {
            if k >= dim {
                return Err(CliError::Config(format!(
                    "basis index {k} out of range for dimension {dim}"
                )));
            }
            return Ok(ProjectiveState::basis(dim, k));
        }
    }
    let pairs: Vec<[f64; 2]> = serde_json::from_str(trimmed).map_err(|e| {
        CliError::Config(format!(
            "state must be \"e<k>\" or a JSON array of [re, im] pairs: {e}"
        ))
    })?;
    state_from_pairs(&pairs, dim)
}

fn state_from_spec(spec: &StateSpec, dim: usize) -> Result<ProjectiveState, CliError> {
    match spec {
        StateSpec::Basis(name) => parse_state_text(name, dim),
        StateSpec::Amplitudes(pairs) => state_from_pairs(pairs, dim),
    }
}

fn state_from_pairs(pairs: &[[f64; 2]], dim: usize) -> Result<ProjectiveState, CliError> {
    if pairs.len() != dim {
        return Err(CliError::Config(format!(
            "state has {} amplitudes, expected {dim}",
            pairs.len()
        )));
    }
    let v = CVector::from_iterator(dim, pairs.iter().map(|&[re, im]| Complex64::new(re, im)));
    ProjectiveState::from_vector(v).map_err(|e| CliError::Config(e.to_string()))
}

fn parse_matrix(rows: &[Vec<[f64; 2]>], dim: usize, what: &str) -> Result<CMatrix, CliError> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(CliError::Config(format!(
            "{what} must be a {dim}x{dim} matrix of [re, im] pairs"
        )));
    }
    Ok(CMatrix::from_fn(dim, dim, |r, c| {
        Complex64::new(rows[r][c][0], rows[r][c][1])
    }))
}

fn build_observable(spec: &ObservableSpec, dim: usize) -> Result<Observable, CliError> {
    match spec {
        ObservableSpec::Projectors {
            projectors,
            eigenvalues,
        } => {
            let mats = projectors
                .iter()
                .enumerate()
                .map(|(j, p)| parse_matrix(p, dim, &format!("projector {}", j + 1)))
                .collect::<Result<Vec<_>, _>>()?;
            Observable::new(mats, eigenvalues.clone())
                .map_err(|e| CliError::Config(e.to_string()))
        }
        ObservableSpec::Eigenbasis {
            eigenbasis,
            partition,
            eigenvalues,
        } => {
            let basis = UnitaryMatrix::new(parse_matrix(eigenbasis, dim, "eigenbasis")?)
                .map_err(|e| CliError::Config(format!("eigenbasis: {e}")))?;
            Observable::from_eigenbasis(&basis, partition, eigenvalues.clone())
                .map_err(|e| CliError::Config(e.to_string()))
        }
    }
}

fn build_rule(
    spec: &RuleSpec,
    dim: usize,
    num_outcomes: usize,
    seed_override: Option<u64>,
) -> Result<ChoiceRule, CliError> {
    match spec {
        RuleSpec::BlankOnly => Ok(ChoiceRule::BlankOnly),
        RuleSpec::BornGreedy => Ok(ChoiceRule::BornGreedy),
        RuleSpec::HashedBorn { seed, blank_prob } => {
            let seed = seed_override.unwrap_or(*seed);
            ChoiceRule::hashed_born(seed, *blank_prob)
                .map_err(|e| CliError::Config(e.to_string()))
        }
        RuleSpec::Table {
            states,
            labels,
            match_radius,
        } => {
            if states.len() != labels.len() {
                return Err(CliError::Config(format!(
                    "table rule has {} states but {} labels",
                    states.len(),
                    labels.len()
                )));
            }
            let entries = states
                .iter()
                .zip(labels)
                .map(|(s, &l)| {
                    let state = state_from_spec(s, dim)?;
                    let label = OutcomeLabel::new(l, num_outcomes)
                        .map_err(|e| CliError::Config(e.to_string()))?;
                    Ok((state, label))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(ChoiceRule::Table {
                entries,
                match_radius: *match_radius,
            })
        }
    }
}
