//! PVM collapse events, outcome domains, deterministic choice rules, and the
//! realized single-branch map T.
//!
//! A step applies the ambient unitary and then, for outcome j >= 1, projects
//! onto the j-th eigenspace and renormalizes: `f_j([u]) = P_j U u / ||P_j U u||`.
//! Outcome 0 is the blank channel (P_0 = I): pure unitary motion. A choice
//! rule assigns each state the outcome of its next step; iterating it along
//! the orbit produces an itinerary that shifts correctly by construction.

use crate::eigen::{CMatrix, CVector};
use crate::error::{Error, Result};
use crate::qstate::{fs_distance, ProjectiveState, UnitaryMatrix};
use crate::sampling;
use crate::tol;

/// Spectral projectors P_1..P_m of a single self-adjoint observable, with
/// their distinct eigenvalues. The blank channel P_0 = I is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    projectors: Vec<CMatrix>,
    eigenvalues: Vec<f64>,
    dim: usize,
}

impl Observable {
    /// Validates idempotence, hermiticity, mutual orthogonality, completeness
    /// and eigenvalue distinctness.
    pub fn new(projectors: Vec<CMatrix>, eigenvalues: Vec<f64>) -> Result<Self> {
        if projectors.is_empty() {
            return Err(Error::Observable {
                reason: "need at least one projector".into(),
            });
        }
        if projectors.len() != eigenvalues.len() {
            return Err(Error::Observable {
                reason: format!(
                    "{} projectors but {} eigenvalues",
                    projectors.len(),
                    eigenvalues.len()
                ),
            });
        }
        let dim = projectors[0].nrows();
        for (j, p) in projectors.iter().enumerate() {
            if p.nrows() != dim || p.ncols() != dim {
                return Err(Error::Observable {
                    reason: format!("projector {} is not {dim}x{dim}", j + 1),
                });
            }
            let herm = (p - p.adjoint()).map(|z| z.norm()).max();
            if herm > tol::PVM {
                return Err(Error::Observable {
                    reason: format!("projector {} not Hermitian (residual {herm:.3e})", j + 1),
                });
            }
            let idem = (p * p - p).map(|z| z.norm()).max();
            if idem > tol::PVM {
                return Err(Error::Observable {
                    reason: format!("projector {} not idempotent (residual {idem:.3e})", j + 1),
                });
            }
        }
        for a in 0..projectors.len() {
            for b in (a + 1)..projectors.len() {
                let cross = (&projectors[a] * &projectors[b]).map(|z| z.norm()).max();
                if cross > tol::PVM {
                    return Err(Error::Observable {
                        reason: format!(
                            "projectors {} and {} not orthogonal (residual {cross:.3e})",
                            a + 1,
                            b + 1
                        ),
                    });
                }
            }
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for p in &projectors {
            sum += p;
        }
        let complete = (sum - CMatrix::identity(dim, dim)).map(|z| z.norm()).max();
        if complete > tol::PVM {
            return Err(Error::Observable {
                reason: format!("projectors do not sum to identity (residual {complete:.3e})"),
            });
        }
        for a in 0..eigenvalues.len() {
            for b in (a + 1)..eigenvalues.len() {
                if eigenvalues[a] == eigenvalues[b] {
                    return Err(Error::Observable {
                        reason: format!("eigenvalues {} and {} coincide", a + 1, b + 1),
                    });
                }
            }
        }
        Ok(Self {
            projectors,
            eigenvalues,
            dim,
        })
    }

    /// Builds the projectors from an orthonormal eigenbasis and a partition of
    /// its column indices into eigenspaces.
    pub fn from_eigenbasis(
        basis: &UnitaryMatrix,
        partition: &[Vec<usize>],
        eigenvalues: Vec<f64>,
    ) -> Result<Self> {
        let dim = basis.dim();
        let mut seen = vec![false; dim];
        for group in partition {
            for &k in group {
                if k >= dim {
                    return Err(Error::Observable {
                        reason: format!("basis index {k} out of range"),
                    });
                }
                if seen[k] {
                    return Err(Error::Observable {
                        reason: format!("basis index {k} appears twice in the partition"),
                    });
                }
                seen[k] = true;
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::Observable {
                reason: "partition does not cover the whole basis".into(),
            });
        }
        let projectors = partition
            .iter()
            .map(|group| {
                let mut p = CMatrix::zeros(dim, dim);
                for &k in group {
                    let col = basis.entries().column(k);
                    p += col * col.adjoint();
                }
                p
            })
            .collect();
        Self::new(projectors, eigenvalues)
    }

    /// Number of non-blank outcomes m.
    pub fn num_outcomes(&self) -> usize {
        self.projectors.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Projector for outcome j >= 1.
    pub fn projector(&self, j: usize) -> &CMatrix {
        &self.projectors[j - 1]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

/// Outcome index in {0, ..., m}; 0 is the blank (no-collapse) channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutcomeLabel(usize);

impl OutcomeLabel {
    pub fn new(value: usize, num_outcomes: usize) -> Result<Self> {
        if value > num_outcomes {
            return Err(Error::InvalidInput(format!(
                "outcome label {value} out of range 0..={num_outcomes}"
            )));
        }
        Ok(Self(value))
    }

    pub fn blank() -> Self {
        Self(0)
    }

    pub fn value(&self) -> usize {
        self.0
    }

    pub fn is_blank(&self) -> bool {
        self.0 == 0
    }
}

/// Born weights after the unitary step: entry 0 is 1 (blank always available),
/// entry j >= 1 is ||P_j U u||^2. Entries 1..m sum to 1.
pub fn born_weights(u: &ProjectiveState, unitary: &UnitaryMatrix, a: &Observable) -> Vec<f64> {
    assert_eq!(u.dim(), unitary.dim(), "state/unitary dimension mismatch");
    assert_eq!(u.dim(), a.dim(), "state/observable dimension mismatch");
    let evolved = unitary.apply_vector(u.amplitudes());
    let mut weights = Vec::with_capacity(a.num_outcomes() + 1);
    weights.push(1.0);
    for j in 1..=a.num_outcomes() {
        weights.push((a.projector(j) * &evolved).norm_squared());
    }
    weights
}

/// One collapse event with outcome j: `[u] -> [P_j U u]` (j = 0 gives `[U u]`).
pub fn apply_collapse(
    u: &ProjectiveState,
    unitary: &UnitaryMatrix,
    a: &Observable,
    label: OutcomeLabel,
) -> Result<ProjectiveState> {
    let evolved = unitary.apply_vector(u.amplitudes());
    if label.is_blank() {
        return ProjectiveState::from_vector(evolved);
    }
    let projected: CVector = a.projector(label.value()) * &evolved;
    let norm = projected.norm();
    if norm <= tol::ZERO_WEIGHT_NORM {
        return Err(Error::ZeroBornWeight {
            label: label.value(),
            norm,
        });
    }
    ProjectiveState::from_vector(projected)
}

/// Deterministic per-step outcome selection. Equal canonical states always
/// yield equal labels, and a label is only ever chosen where its Born weight
/// is strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub enum ChoiceRule {
    /// Always the blank channel: the realized branch is pure unitary motion.
    BlankOnly,
    /// The non-blank outcome of largest Born weight; ties go to the lowest
    /// label index.
    BornGreedy,
    /// Hashes the canonical state bytes with a seed to a uniform number, then
    /// samples the Born distribution over {1..m}, reserving probability
    /// `blank_prob` for the blank channel. Deterministic in the state, yet
    /// scattered enough to reach every label near every state in practice.
    HashedBorn { seed: u64, blank_prob: f64 },
    /// Explicit map on a finite state set: the nearest table state within
    /// `match_radius` decides; unmatched states take the blank channel.
    Table {
        entries: Vec<(ProjectiveState, OutcomeLabel)>,
        match_radius: f64,
    },
}

impl ChoiceRule {
    pub fn hashed_born(seed: u64, blank_prob: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&blank_prob) {
            return Err(Error::InvalidInput(format!(
                "blank probability must lie in [0, 1), got {blank_prob}"
            )));
        }
        Ok(Self::HashedBorn { seed, blank_prob })
    }

    /// The outcome this rule selects at `u` for the step (unitary, observable).
    pub fn select(
        &self,
        u: &ProjectiveState,
        unitary: &UnitaryMatrix,
        a: &Observable,
    ) -> OutcomeLabel {
        match self {
            ChoiceRule::BlankOnly => OutcomeLabel::blank(),
            ChoiceRule::BornGreedy => {
                let weights = born_weights(u, unitary, a);
                let mut best = 1;
                for j in 2..weights.len() {
                    if weights[j] > weights[best] {
                        best = j;
                    }
                }
                OutcomeLabel(best)
            }
            ChoiceRule::HashedBorn { seed, blank_prob } => {
                let weights = born_weights(u, unitary, a);
                let r = unit_interval_hash(u, *seed);
                if r < *blank_prob {
                    return OutcomeLabel::blank();
                }
                let r = (r - blank_prob) / (1.0 - blank_prob);
                // Restrict to outcomes clear of the kernel threshold.
                let min_weight = tol::ZERO_WEIGHT_NORM * tol::ZERO_WEIGHT_NORM;
                let total: f64 = weights[1..]
                    .iter()
                    .map(|&w| if w > min_weight { w } else { 0.0 })
                    .sum();
                let mut acc = 0.0;
                let mut chosen = 0;
                for (j, &w) in weights.iter().enumerate().skip(1) {
                    if w <= min_weight {
                        continue;
                    }
                    chosen = j;
                    acc += w / total;
                    if r < acc {
                        break;
                    }
                }
                OutcomeLabel(chosen)
            }
            ChoiceRule::Table {
                entries,
                match_radius,
            } => {
                let mut best: Option<(f64, OutcomeLabel)> = None;
                for (state, label) in entries {
                    if state.dim() != u.dim() {
                        continue;
                    }
                    let d = fs_distance(state, u).expect("dimensions checked");
                    if d <= *match_radius && best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, *label));
                    }
                }
                best.map_or(OutcomeLabel::blank(), |(_, label)| label)
            }
        }
    }
}

/// Stable 64-bit mix of the canonical amplitude bytes with a seed, mapped to
/// [0, 1). Independent of platform and process, so runs replay exactly.
fn unit_interval_hash(u: &ProjectiveState, seed: u64) -> f64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for z in u.amplitudes().iter() {
        h = splitmix64(h ^ z.re.to_bits());
        h = splitmix64(h ^ z.im.to_bits());
    }
    (splitmix64(h) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// One step of the realized map T: select the outcome, collapse, return both.
pub fn step_realized(
    u: &ProjectiveState,
    unitary: &UnitaryMatrix,
    a: &Observable,
    rule: &ChoiceRule,
) -> Result<(ProjectiveState, OutcomeLabel)> {
    let label = rule.select(u, unitary, a);
    if !label.is_blank() {
        let weights = born_weights(u, unitary, a);
        let norm = weights[label.value()].sqrt();
        if norm <= tol::ZERO_WEIGHT_NORM {
            return Err(Error::Admissibility {
                label: label.value(),
                norm,
            });
        }
    }
    let next = apply_collapse(u, unitary, a, label).map_err(|e| match e {
        Error::ZeroBornWeight { label, norm } => Error::Admissibility { label, norm },
        other => other,
    })?;
    Ok((next, label))
}

/// Runs T for `steps` steps: returns the outcome itinerary (length `steps`)
/// and the state trace (length `steps` + 1). The itinerary of the next state
/// is the left shift of this one by construction.
pub fn realize_itinerary(
    u: &ProjectiveState,
    unitary: &UnitaryMatrix,
    a: &Observable,
    rule: &ChoiceRule,
    steps: usize,
) -> Result<(Vec<OutcomeLabel>, Vec<ProjectiveState>)> {
    assert!(steps >= 1, "need at least one step");
    let mut itinerary = Vec::with_capacity(steps);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(u.clone());
    for _ in 0..steps {
        let (next, label) = step_realized(states.last().unwrap(), unitary, a, rule)?;
        itinerary.push(label);
        states.push(next);
    }
    Ok((itinerary, states))
}

/// A point of the skew product: a finite outcome-itinerary prefix paired with
/// a state admissible for its first symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewPoint {
    itinerary: Vec<OutcomeLabel>,
    state: ProjectiveState,
}

impl SkewPoint {
    /// Validates that the first symbol has positive Born weight at `state`
    /// (an empty prefix is allowed and means the point is terminal).
    pub fn new(
        itinerary: Vec<OutcomeLabel>,
        state: ProjectiveState,
        unitary: &UnitaryMatrix,
        a: &Observable,
    ) -> Result<Self> {
        if let Some(first) = itinerary.first() {
            if !first.is_blank() {
                let weights = born_weights(&state, unitary, a);
                let norm = weights[first.value()].sqrt();
                if norm <= tol::ZERO_WEIGHT_NORM {
                    return Err(Error::ZeroBornWeight {
                        label: first.value(),
                        norm,
                    });
                }
            }
        }
        Ok(Self { itinerary, state })
    }

    pub fn itinerary(&self) -> &[OutcomeLabel] {
        &self.itinerary
    }

    pub fn state(&self) -> &ProjectiveState {
        &self.state
    }
}

/// The skew-product map F: shift the itinerary, collapse the state with its
/// first symbol.
pub fn step_skew(p: &SkewPoint, unitary: &UnitaryMatrix, a: &Observable) -> Result<SkewPoint> {
    let first = *p.itinerary.first().ok_or_else(|| {
        Error::InvalidInput("cannot step a skew point with an empty itinerary".into())
    })?;
    let state = apply_collapse(&p.state, unitary, a, first)?;
    Ok(SkewPoint {
        itinerary: p.itinerary[1..].to_vec(),
        state,
    })
}

/// Per-label coverage statistics for a choice rule.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDensity {
    pub label: usize,
    /// How many of the samples selected this label.
    pub attained: usize,
    /// Max over the probe set of the distance to the nearest sample with this
    /// label; infinity when the label was never attained.
    pub covering_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityProbe {
    pub samples: usize,
    pub probes: usize,
    pub per_label: Vec<LabelDensity>,
}

/// Empirical probe of the density property: how close, at sampling resolution,
/// every label comes to every state. Probes are the first `min(64, samples)`
/// sampled states, so a rule that sends everything to one label reports
/// radius 0 for it and infinity for the rest.
pub fn label_density_probe(
    rule: &ChoiceRule,
    unitary: &UnitaryMatrix,
    a: &Observable,
    samples: usize,
    seed: u64,
) -> DensityProbe {
    assert!(samples >= 100, "need at least 100 samples");
    let mut rng = sampling::rng_from_seed(seed);
    let dim = a.dim();
    let states: Vec<ProjectiveState> = (0..samples)
        .map(|_| sampling::random_state(dim, &mut rng))
        .collect();
    let labels: Vec<usize> = states
        .iter()
        .map(|s| rule.select(s, unitary, a).value())
        .collect();
    let probe_count = samples.min(64);
    let probes = &states[..probe_count];

    let per_label = (0..=a.num_outcomes())
        .map(|label| {
            let attained = labels.iter().filter(|&&l| l == label).count();
            let covering_radius = if attained == 0 {
                f64::INFINITY
            } else {
                probes
                    .iter()
                    .map(|p| {
                        states
                            .iter()
                            .zip(&labels)
                            .filter(|(_, &l)| l == label)
                            .map(|(s, _)| fs_distance(p, s).expect("same dimension"))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(0.0, f64::max)
            };
            LabelDensity {
                label,
                attained,
                covering_radius,
            }
        })
        .collect();

    DensityProbe {
        samples,
        probes: probe_count,
        per_label,
    }
}
