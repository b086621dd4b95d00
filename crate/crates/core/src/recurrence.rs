//! Finite-precision recurrence machinery: orbit stages alternating with
//! accumulation ("limit") stages, multi-scale quasi-loop certificates at a
//! single base point, and extraction of approximately invariant, internally
//! chain-transitive sets.
//!
//! The limit stage replaces "pass to an accumulation point of the history"
//! with "jump to a point whose ball of the bucket radius was visited at least
//! m_min times": the finite analogue of the construction's two primitive
//! operations (apply the map; take an accumulation point). Transfinite depth
//! becomes a capped count of limit stages, and the reports record whether the
//! budget, not the mathematics, ended the search.

use crate::chains::{min_costs_from, StateNet, StrongChain};
use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::qstate::{fs_distance, ProjectiveState};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    /// `points[k+1] = T(points[k])`.
    Orbit,
    /// `points[k+1]` jumped to a frequently visited bucket center.
    Limit,
}

/// Provenance of one limit stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitEvent {
    /// Index of the limit point within the stage sequence.
    pub stage_index: usize,
    /// Index of the chosen bucket center among the prior points.
    pub center_index: usize,
    /// How many prior points were inside the center's bucket.
    pub visit_count: usize,
    pub bucket_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// All orbit and limit budgets were used.
    BudgetExhausted,
    /// A new point landed within the exact-revisit tolerance of point
    /// `matched`; the dynamics is (numerically) periodic from there.
    ExactRevisit { step: usize, matched: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageBudget {
    /// Length of each orbit stage.
    pub orbit_len: usize,
    /// Number of limit stages interleaved between orbit runs.
    pub max_limit_stages: usize,
}

/// The recorded history of orbit and limit stages.
#[derive(Debug, Clone)]
pub struct StageSequence {
    points: Vec<ProjectiveState>,
    kinds: Vec<StageKind>,
    bucket_radius: f64,
    m_min: usize,
    limit_events: Vec<LimitEvent>,
    termination: Termination,
}

impl StageSequence {
    pub fn points(&self) -> &[ProjectiveState] {
        &self.points
    }

    pub fn kinds(&self) -> &[StageKind] {
        &self.kinds
    }

    pub fn bucket_radius(&self) -> f64 {
        self.bucket_radius
    }

    pub fn m_min(&self) -> usize {
        self.m_min
    }

    pub fn limit_events(&self) -> &[LimitEvent] {
        &self.limit_events
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Cheap projective invariant used to prescreen near-equality: |<e_0, x>|^2.
fn first_weight(state: &ProjectiveState) -> f64 {
    state.amplitudes()[0].norm_sqr()
}

/// Candidate bucket centers are subsampled at this cap; visit counts are
/// still taken over the whole history.
const CENTER_CANDIDATE_CAP: usize = 2000;

fn candidate_stride(n: usize) -> usize {
    n.div_ceil(CENTER_CANDIDATE_CAP).max(1)
}

/// The candidate center with the most history points inside its bucket
/// (ties to the earliest index). Returns (index, count).
fn most_visited_center(points: &[ProjectiveState], radius: f64) -> (usize, usize) {
    let stride = candidate_stride(points.len());
    let mut best = (0usize, 0usize);
    for c in (0..points.len()).step_by(stride) {
        let mut count = 0;
        for p in points {
            if fs_distance(&points[c], p).expect("same space") <= radius {
                count += 1;
            }
        }
        if count > best.1 {
            best = (c, count);
        }
    }
    best
}

/// Alternates orbit runs with limit stages. Terminates early on an exact
/// revisit (the orbit is numerically periodic) and fails with `Stagnation`
/// when no bucket reaches `m_min` visits at a limit stage.
pub fn run_stages(
    x0: &ProjectiveState,
    dynamics: &Dynamics,
    budget: StageBudget,
    bucket_radius: f64,
    m_min: usize,
) -> Result<StageSequence> {
    if budget.orbit_len == 0 {
        return Err(Error::InvalidInput("orbit_len must be positive".into()));
    }
    if bucket_radius.is_nan() || bucket_radius <= 0.0 || m_min < 2 {
        return Err(Error::InvalidInput(
            "need a positive bucket radius and m_min >= 2".into(),
        ));
    }
    let mut points = vec![x0.clone()];
    let mut kinds = vec![StageKind::Orbit];
    let mut first_weights = vec![first_weight(x0)];
    let mut limit_events = Vec::new();

    let mut termination = Termination::BudgetExhausted;
    'stages: for limit_round in 0..=budget.max_limit_stages {
        for _ in 0..budget.orbit_len {
            let next = dynamics.map(points.last().unwrap())?;
            let w = first_weight(&next);
            // Exact-revisit scan, prescreened by the first Born weight (a
            // projective invariant, so no near-revisit can slip past it).
            let mut matched = None;
            for (i, p) in points.iter().enumerate() {
                if (first_weights[i] - w).abs() > 1e-8 {
                    continue;
                }
                if fs_distance(p, &next)? < tol::EXACT_REVISIT {
                    matched = Some(i);
                    break;
                }
            }
            let step = points.len();
            points.push(next);
            kinds.push(StageKind::Orbit);
            first_weights.push(w);
            if let Some(matched) = matched {
                termination = Termination::ExactRevisit { step, matched };
                break 'stages;
            }
        }
        if limit_round == budget.max_limit_stages {
            break;
        }
        let (center, count) = most_visited_center(&points, bucket_radius);
        if count < m_min {
            return Err(Error::Stagnation {
                radius: bucket_radius,
                needed: m_min,
                best: count,
            });
        }
        limit_events.push(LimitEvent {
            stage_index: points.len(),
            center_index: center,
            visit_count: count,
            bucket_radius,
        });
        points.push(points[center].clone());
        kinds.push(StageKind::Limit);
        first_weights.push(first_weights[center]);
    }

    Ok(StageSequence {
        points,
        kinds,
        bucket_radius,
        m_min,
        limit_events,
        termination,
    })
}

/// A strong loop (or the lack of one) at one scale.
#[derive(Debug, Clone)]
pub struct ScaleLoop {
    pub scale: f64,
    pub chain: Option<StrongChain>,
}

/// Per-scale strong loops anchored at one base point of the stage history.
#[derive(Debug, Clone)]
pub struct RecurrenceCertificate {
    base: ProjectiveState,
    base_index: usize,
    base_visits: usize,
    loops: Vec<ScaleLoop>,
    nested: bool,
}

impl RecurrenceCertificate {
    pub fn base(&self) -> &ProjectiveState {
        &self.base
    }

    pub fn base_index(&self) -> usize {
        self.base_index
    }

    pub fn base_visits(&self) -> usize {
        self.base_visits
    }

    pub fn loops(&self) -> &[ScaleLoop] {
        &self.loops
    }

    /// True when every scale produced a loop at the same base and each finer
    /// loop's return already fits inside the previous scale's ball around it.
    /// This is the scale-wise content the naive grid argument cannot deliver:
    /// the base does not drift as the scale shrinks.
    pub fn nested(&self) -> bool {
        self.nested
    }
}

/// Forward jump costs along the stage sequence. Orbit steps cost exactly
/// zero (the successor is the recomputed image, bit for bit); limit steps pay
/// the true distance from the image to the chosen center.
fn forward_costs(seq: &StageSequence, dynamics: &Dynamics, from: usize) -> Result<Vec<f64>> {
    let points = seq.points();
    let mut costs = Vec::with_capacity(points.len() - from);
    for i in from..points.len() - 1 {
        let cost = match seq.kinds()[i + 1] {
            StageKind::Orbit => 0.0,
            StageKind::Limit => {
                let image = dynamics.map(&points[i])?;
                fs_distance(&image, &points[i + 1])?
            }
        };
        costs.push(cost);
    }
    Ok(costs)
}

/// Searches the history for the cheapest strong loop at the base for each
/// scale: follow the sequence forward from the base (orbit steps are free),
/// then close back with one jump. This is a min-cost search restricted to the
/// history graph. Scales must be strictly decreasing; scales that admit no
/// loop within the history are reported with `chain: None`.
pub fn certify_recurrence(
    seq: &StageSequence,
    dynamics: &Dynamics,
    scales: &[f64],
) -> Result<RecurrenceCertificate> {
    if seq.len() < 2 {
        return Err(Error::InvalidInput("stage sequence too short".into()));
    }
    if scales.is_empty() {
        return Err(Error::InvalidInput("need at least one scale".into()));
    }
    for pair in scales.windows(2) {
        if pair[1].is_nan() || pair[0].is_nan() || pair[1] >= pair[0] {
            return Err(Error::InvalidInput(
                "scales must be strictly decreasing".into(),
            ));
        }
    }
    if scales[scales.len() - 1].is_nan() || scales[scales.len() - 1] <= 0.0 {
        return Err(Error::InvalidInput("scales must be positive".into()));
    }

    let selection_radius = scales[scales.len() - 1] / 2.0;
    let (base_index, base_visits) = most_visited_center(seq.points(), selection_radius);
    let base = seq.points()[base_index].clone();

    let points = seq.points();
    let step_costs = forward_costs(seq, dynamics, base_index)?;
    // cumulative[j - base_index] = cost of following the history base -> j.
    let mut cumulative = vec![0.0];
    for c in &step_costs {
        cumulative.push(cumulative.last().unwrap() + c);
    }
    // Closing jump from each j back to the base.
    let closing: Vec<f64> = (base_index..points.len())
        .map(|j| {
            let image = dynamics.map(&points[j])?;
            fs_distance(&image, &base)
        })
        .collect::<Result<_>>()?;

    let mut loops = Vec::with_capacity(scales.len());
    for &scale in scales {
        let mut best: Option<(usize, f64)> = None;
        for (offset, close) in closing.iter().enumerate() {
            let total = cumulative[offset] + close;
            if best.is_none_or(|(_, b)| total < b) {
                best = Some((offset, total));
            }
        }
        let chain = best.and_then(|(offset, total)| {
            if total < scale {
                let j = base_index + offset;
                let mut chain_points: Vec<ProjectiveState> =
                    points[base_index..=j].to_vec();
                chain_points.push(base.clone());
                let mut jump_costs = step_costs[..offset].to_vec();
                jump_costs.push(closing[offset]);
                Some(
                    StrongChain::from_parts(chain_points, jump_costs, scale)
                        .expect("totals checked against the scale"),
                )
            } else {
                None
            }
        });
        loops.push(ScaleLoop { scale, chain });
    }

    let nested = loops.iter().all(|l| l.chain.is_some())
        && loops.windows(2).all(|pair| match &pair[1].chain {
            Some(chain) => chain.total_cost() < pair[0].scale,
            None => false,
        });

    Ok(RecurrenceCertificate {
        base,
        base_index,
        base_visits,
        loops,
        nested,
    })
}

/// An approximately invariant, internally chain-transitive set at one scale.
#[derive(Debug, Clone)]
pub struct TransitiveSetApprox {
    members: Vec<ProjectiveState>,
    scale: f64,
    /// Chain-cost upper bounds between all ordered member pairs, witnessed by
    /// chains whose points stay inside the member set.
    pairwise_costs: Vec<Vec<f64>>,
    /// max over members of the distance from its image to the nearest member.
    invariance_defect: f64,
}

impl TransitiveSetApprox {
    pub fn members(&self) -> &[ProjectiveState] {
        &self.members
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn pairwise_costs(&self) -> &[Vec<f64>] {
        &self.pairwise_costs
    }

    pub fn invariance_defect(&self) -> f64 {
        self.invariance_defect
    }

    pub fn max_pairwise_cost(&self) -> f64 {
        self.pairwise_costs
            .iter()
            .flatten()
            .fold(0.0f64, |acc, &c| acc.max(c))
    }

    /// Internal transitivity and approximate invariance at the set's scale.
    pub fn satisfies_invariants(&self) -> bool {
        self.max_pairwise_cost() < self.scale && self.invariance_defect < self.scale
    }
}

/// Extracts the points between the first two same-run visits to the base
/// bucket, closes the set under T-images until it is approximately invariant,
/// and computes the pairwise chain-cost matrix over the member graph.
pub fn extract_transitive_set(
    seq: &StageSequence,
    dynamics: &Dynamics,
    scale: f64,
    size_cap: usize,
) -> Result<TransitiveSetApprox> {
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::InvalidInput("scale must be positive".into()));
    }
    let visit_radius = 0.45 * scale.min(2.0 * seq.bucket_radius());
    let (base_index, _) = most_visited_center(seq.points(), visit_radius);
    let base = &seq.points()[base_index];

    // First pair of consecutive bucket visits with no limit jump in between.
    let points = seq.points();
    let mut last_visit: Option<usize> = None;
    let mut segment: Option<(usize, usize)> = None;
    'scan: for (offset, point) in points[base_index..].iter().enumerate() {
        let t = base_index + offset;
        if fs_distance(point, base)? <= visit_radius {
            if let Some(prev) = last_visit {
                let clean = (prev + 1..=t).all(|k| seq.kinds()[k] == StageKind::Orbit);
                if clean && t > prev {
                    segment = Some((prev, t));
                    break 'scan;
                }
            }
            last_visit = Some(t);
        }
    }
    let (t1, t2) = segment.ok_or(Error::Stagnation {
        radius: visit_radius,
        needed: 2,
        best: 1,
    })?;

    let mut members: Vec<ProjectiveState> = Vec::new();
    for p in &points[t1..t2] {
        if !members.contains(p) {
            members.push(p.clone());
        }
    }
    if members.len() > size_cap {
        return Err(Error::SizeCap { cap: size_cap });
    }

    // Close under images until approximately invariant at the scale.
    loop {
        let mut additions: Vec<ProjectiveState> = Vec::new();
        for m in &members {
            let image = dynamics.map(m)?;
            let nearest = members
                .iter()
                .chain(additions.iter())
                .map(|other| fs_distance(&image, other).expect("same space"))
                .fold(f64::INFINITY, f64::min);
            if nearest >= scale && !additions.contains(&image) {
                additions.push(image);
            }
        }
        if additions.is_empty() {
            break;
        }
        members.extend(additions);
        if members.len() > size_cap {
            return Err(Error::SizeCap { cap: size_cap });
        }
    }
    // Invariance defect over the settled membership.
    let mut defect = 0.0f64;
    for m in &members {
        let image = dynamics.map(m)?;
        let nearest = members
            .iter()
            .map(|other| fs_distance(&image, other).expect("same space"))
            .fold(f64::INFINITY, f64::min);
        defect = defect.max(nearest);
    }

    // Pairwise chain costs over the member graph: witnesses stay inside the
    // set because every hop of every path targets a member.
    let pairwise_costs = if members.len() >= 2 {
        let net = StateNet::from_states(dynamics, members.clone())?;
        (0..members.len())
            .map(|i| min_costs_from(&net, i, None))
            .collect()
    } else {
        vec![vec![0.0]]
    };

    Ok(TransitiveSetApprox {
        members,
        scale,
        pairwise_costs,
        invariance_defect: defect,
    })
}

/// Exact periodicity detection: the first return of the orbit to its start
/// within the exact-revisit tolerance, up to `horizon` steps.
pub fn detect_periodicity(
    x0: &ProjectiveState,
    dynamics: &Dynamics,
    horizon: usize,
) -> Result<Option<(usize, Vec<ProjectiveState>)>> {
    assert!(horizon >= 1, "horizon must be positive");
    let mut orbit = vec![x0.clone()];
    for period in 1..=horizon {
        let next = dynamics.map(orbit.last().unwrap())?;
        if fs_distance(&next, x0)? < tol::EXACT_REVISIT {
            return Ok(Some((period, orbit)));
        }
        orbit.push(next);
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::chain_cost;
    use crate::collapse::{ChoiceRule, Observable, OutcomeLabel};
    use crate::eigen::CMatrix;
    use crate::qstate::{unitary_log, HermitianMatrix, UnitaryMatrix};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qubit_pvm() -> Observable {
        let p0 = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let p1 = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        Observable::new(vec![p0, p1], vec![1.0, -1.0]).unwrap()
    }

    fn rotation_dynamics(theta: f64, rule: ChoiceRule) -> Dynamics {
        let h = HermitianMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(0.0, -theta), c(0.0, theta), c(0.0, 0.0)],
        ))
        .unwrap();
        Dynamics::new(h, qubit_pvm(), rule).unwrap()
    }

    const GOLDEN_ANGLE: f64 = 1.9416110387254506;

    #[test]
    fn fixed_point_terminates_on_exact_revisit() {
        let dynamics = rotation_dynamics(0.0, ChoiceRule::BlankOnly);
        let x0 = ProjectiveState::basis(2, 0);
        let seq = run_stages(
            &x0,
            &dynamics,
            StageBudget {
                orbit_len: 100,
                max_limit_stages: 3,
            },
            0.05,
            3,
        )
        .unwrap();
        assert!(matches!(
            seq.termination(),
            Termination::ExactRevisit { step: 1, matched: 0 }
        ));
        assert_eq!(seq.len(), 2);
    }

    #[test]
    fn irrational_rotation_fires_a_limit_stage() {
        let dynamics = rotation_dynamics(GOLDEN_ANGLE, ChoiceRule::BlankOnly);
        let x0 = ProjectiveState::basis(2, 0);
        let seq = run_stages(
            &x0,
            &dynamics,
            StageBudget {
                orbit_len: 1000,
                max_limit_stages: 1,
            },
            0.05,
            5,
        )
        .unwrap();
        assert_eq!(seq.limit_events().len(), 1);
        let event = seq.limit_events()[0];
        assert!(event.visit_count >= 5);
        assert_eq!(seq.kinds()[event.stage_index], StageKind::Limit);
        assert_eq!(
            seq.points()[event.stage_index],
            seq.points()[event.center_index]
        );
    }

    /// Rank-1 projectors send every same-label collapse to one exact point,
    /// so deterministic rules cycle within a few steps. Degenerate (rank-2)
    /// eigenspaces keep the landing points moving and let limit stages fire.
    fn degenerate_hashed_dynamics(seed: u64) -> Dynamics {
        let mut rng = crate::sampling::rng_from_seed(97);
        let h = crate::sampling::random_hermitian(4, 1.0, &mut rng);
        let mut p_a = CMatrix::zeros(4, 4);
        p_a[(0, 0)] = c(1.0, 0.0);
        p_a[(1, 1)] = c(1.0, 0.0);
        let mut p_b = CMatrix::zeros(4, 4);
        p_b[(2, 2)] = c(1.0, 0.0);
        p_b[(3, 3)] = c(1.0, 0.0);
        let observable = Observable::new(vec![p_a, p_b], vec![1.0, -1.0]).unwrap();
        Dynamics::new(h, observable, ChoiceRule::hashed_born(seed, 0.4).unwrap()).unwrap()
    }

    #[test]
    fn hashed_born_rank_one_orbits_cycle_exactly() {
        let dynamics = rotation_dynamics(
            GOLDEN_ANGLE,
            ChoiceRule::hashed_born(19, 0.4).unwrap(),
        );
        let x0 = ProjectiveState::basis(2, 0);
        let seq = run_stages(
            &x0,
            &dynamics,
            StageBudget {
                orbit_len: 1000,
                max_limit_stages: 5,
            },
            0.08,
            5,
        )
        .unwrap();
        assert!(matches!(
            seq.termination(),
            Termination::ExactRevisit { .. }
        ));
    }

    #[test]
    fn hashed_born_stages_keep_orbit_identities() {
        let dynamics = degenerate_hashed_dynamics(19);
        let x0 = ProjectiveState::basis(4, 0);
        let seq = run_stages(
            &x0,
            &dynamics,
            StageBudget {
                orbit_len: 1000,
                max_limit_stages: 5,
            },
            0.25,
            5,
        )
        .unwrap();
        assert!(!seq.limit_events().is_empty());
        // Replay check: every orbit step is exactly the image of its
        // predecessor.
        for k in 1..seq.len() {
            if seq.kinds()[k] == StageKind::Orbit {
                assert_eq!(
                    seq.points()[k],
                    dynamics.map(&seq.points()[k - 1]).unwrap(),
                    "orbit identity broken at stage {k}"
                );
            }
        }
    }

    #[test]
    fn sparse_histories_stagnate() {
        let dynamics = rotation_dynamics(GOLDEN_ANGLE, ChoiceRule::BlankOnly);
        let x0 = ProjectiveState::basis(2, 0);
        let result = run_stages(
            &x0,
            &dynamics,
            StageBudget {
                orbit_len: 20,
                max_limit_stages: 1,
            },
            0.001,
            5,
        );
        assert!(matches!(result, Err(Error::Stagnation { .. })));
    }

    #[test]
    fn periodic_orbit_certifies_every_scale_with_zero_cost_loops() {
        let dynamics = rotation_dynamics(2.0 * PI / 5.0, ChoiceRule::BlankOnly);
        let x0 = ProjectiveState::basis(2, 0);
        let seq = run_stages(
            &x0,
            &dynamics,
            StageBudget {
                orbit_len: 200,
                max_limit_stages: 0,
            },
            0.05,
            5,
        )
        .unwrap();
        let cert = certify_recurrence(&seq, &dynamics, &[0.1, 0.01, 1e-6]).unwrap();
        assert!(cert.nested());
        for l in cert.loops() {
            let chain = l.chain.as_ref().expect("periodic loops at every scale");
            assert!(chain.total_cost() < 1e-12);
            // Independent revalidation.
            let (_, total) = chain_cost(chain.points(), &dynamics).unwrap();
            assert!(total < l.scale);
        }
    }

    #[test]
    fn golden_rotation_certifies_three_scales_nested() {
        let dynamics = rotation_dynamics(GOLDEN_ANGLE, ChoiceRule::BlankOnly);
        let x0 = ProjectiveState::basis(2, 0);
        let seq = run_stages(
            &x0,
            &dynamics,
            StageBudget {
                orbit_len: 10_000,
                max_limit_stages: 0,
            },
            0.05,
            5,
        )
        .unwrap();
        let scales = [0.1, 0.03, 0.01];
        let cert = certify_recurrence(&seq, &dynamics, &scales).unwrap();
        assert!(cert.nested(), "expected loops at all scales");
        for l in cert.loops() {
            let chain = l.chain.as_ref().unwrap();
            assert!(chain.total_cost() < l.scale);
            assert_eq!(chain.points().first(), chain.points().last());
            let (_, total) = chain_cost(chain.points(), &dynamics).unwrap();
            assert!((total - chain.total_cost()).abs() < 1e-9);
        }
        // Monotonicity: a loop at the finest scale certifies any coarser one.
        let finest = cert.loops().last().unwrap().chain.as_ref().unwrap();
        assert!(StrongChain::from_parts(
            finest.points().to_vec(),
            finest.jump_costs().to_vec(),
            0.5
        )
        .is_ok());
    }

    #[test]
    fn budget_starved_searches_yield_partial_certificates() {
        // A fast drifting rotation observed for too few steps returns at the
        // coarse scale but cannot return at the fine one.
        let dynamics = rotation_dynamics(GOLDEN_ANGLE, ChoiceRule::BlankOnly);
        let x0 = ProjectiveState::basis(2, 0);
        let seq = run_stages(
            &x0,
            &dynamics,
            StageBudget {
                orbit_len: 12,
                max_limit_stages: 0,
            },
            0.3,
            2,
        )
        .unwrap();
        let cert = certify_recurrence(&seq, &dynamics, &[0.5, 1e-4]).unwrap();
        assert!(cert.loops()[0].chain.is_some(), "coarse scale should certify");
        assert!(cert.loops()[1].chain.is_none(), "fine scale cannot certify");
        assert!(!cert.nested());
    }

    #[test]
    fn fixed_point_extracts_a_singleton() {
        let dynamics = rotation_dynamics(0.0, ChoiceRule::BlankOnly);
        let x0 = ProjectiveState::basis(2, 0);
        let seq = run_stages(
            &x0,
            &dynamics,
            StageBudget {
                orbit_len: 50,
                max_limit_stages: 0,
            },
            0.05,
            2,
        )
        .unwrap();
        let set = extract_transitive_set(&seq, &dynamics, 0.1, 100).unwrap();
        assert_eq!(set.members().len(), 1);
        assert!(set.invariance_defect() < 1e-12);
        assert!(set.satisfies_invariants());
    }

    #[test]
    fn golden_rotation_extracts_a_circle_segment() {
        let dynamics = rotation_dynamics(GOLDEN_ANGLE, ChoiceRule::BlankOnly);
        let x0 = ProjectiveState::basis(2, 0);
        let seq = run_stages(
            &x0,
            &dynamics,
            StageBudget {
                orbit_len: 5_000,
                max_limit_stages: 0,
            },
            0.05,
            5,
        )
        .unwrap();
        let scale = 0.1;
        let set = extract_transitive_set(&seq, &dynamics, scale, 500).unwrap();
        assert!(set.members().len() >= 3);
        assert!(set.satisfies_invariants());
        assert!(set.max_pairwise_cost() < scale);
        // Circle-geometry oracle: every point of the real-amplitude circle is
        // at angle alpha with state (cos a, sin a); all members must lie on it.
        for m in set.members() {
            let a = m.amplitudes();
            assert!(a[0].im.abs() < 1e-12 && a[1].im.abs() < 1e-12);
        }
    }

    /// Three-cycle permutation dynamics driven by an explicit table rule.
    fn three_cycle_table_dynamics() -> (Dynamics, ProjectiveState) {
        let mut u = CMatrix::zeros(3, 3);
        u[(1, 0)] = c(1.0, 0.0);
        u[(2, 1)] = c(1.0, 0.0);
        u[(0, 2)] = c(1.0, 0.0);
        let h = unitary_log(&UnitaryMatrix::new(u).unwrap()).unwrap();
        let projectors: Vec<CMatrix> = (0..3)
            .map(|k| {
                let mut p = CMatrix::zeros(3, 3);
                p[(k, k)] = c(1.0, 0.0);
                p
            })
            .collect();
        let observable = Observable::new(projectors, vec![1.0, 2.0, 3.0]).unwrap();
        let entries = (0..3)
            .map(|k| {
                (
                    ProjectiveState::basis(3, k),
                    OutcomeLabel::new(0, 3).unwrap(),
                )
            })
            .collect();
        let rule = ChoiceRule::Table {
            entries,
            match_radius: 1e-8,
        };
        let dynamics = Dynamics::new(h, observable, rule).unwrap();
        (dynamics, ProjectiveState::basis(3, 0))
    }

    #[test]
    fn period_three_table_rule_extracts_exactly_the_orbit() {
        let (dynamics, x0) = three_cycle_table_dynamics();
        let seq = run_stages(
            &x0,
            &dynamics,
            StageBudget {
                orbit_len: 50,
                max_limit_stages: 0,
            },
            0.05,
            2,
        )
        .unwrap();
        let set = extract_transitive_set(&seq, &dynamics, 0.05, 100).unwrap();
        assert_eq!(set.members().len(), 3);
        assert!(set.max_pairwise_cost() < 1e-9);
        assert!(set.invariance_defect() < 1e-9);
    }

    #[test]
    fn oversized_extractions_hit_the_size_cap() {
        let dynamics = rotation_dynamics(GOLDEN_ANGLE, ChoiceRule::BlankOnly);
        let x0 = ProjectiveState::basis(2, 0);
        let seq = run_stages(
            &x0,
            &dynamics,
            StageBudget {
                orbit_len: 5_000,
                max_limit_stages: 0,
            },
            0.05,
            5,
        )
        .unwrap();
        assert!(matches!(
            extract_transitive_set(&seq, &dynamics, 0.05, 20),
            Err(Error::SizeCap { cap: 20 })
        ));
    }

    #[test]
    fn detect_periodicity_cases() {
        let fixed = rotation_dynamics(0.0, ChoiceRule::BlankOnly);
        let x0 = ProjectiveState::basis(2, 0);
        let (period, orbit) = detect_periodicity(&x0, &fixed, 10).unwrap().unwrap();
        assert_eq!(period, 1);
        assert_eq!(orbit.len(), 1);

        let five = rotation_dynamics(2.0 * PI / 5.0, ChoiceRule::BlankOnly);
        let (period, orbit) = detect_periodicity(&x0, &five, 100).unwrap().unwrap();
        assert_eq!(period, 5);
        assert_eq!(orbit.len(), 5);

        let golden = rotation_dynamics(GOLDEN_ANGLE, ChoiceRule::BlankOnly);
        assert!(detect_periodicity(&x0, &golden, 1000).unwrap().is_none());
    }
}
