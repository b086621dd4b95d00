//! Strong chains, minimal forward cost over sampled state nets, the composite
//! steering protocol that realizes a chain physically, and the scale-wise
//! grid-refinement diagnostic.
//!
//! Costs are Fubini-Study jump distances d(T(x_i), x_{i+1}); collapse events
//! themselves are free. The minimal forward cost between two states is
//! estimated as a shortest path restricted to net nodes, so every reported
//! cost is an upper bound on the true infimum at the net's resolution.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::collapse::OutcomeLabel;
use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::qstate::{fs_distance, ProjectiveState, UnitaryMatrix};
use crate::sampling;
use crate::steering::{
    synthesize_steering, verify_steering_by_integration, IntegrationReport, SteeringPlan,
};

/// A finite point sequence whose summed per-step jumps from the true image
/// stay below epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongChain {
    points: Vec<ProjectiveState>,
    jump_costs: Vec<f64>,
    epsilon: f64,
}

impl StrongChain {
    /// Wraps precomputed jump costs after validating the chain inequality.
    pub fn from_parts(
        points: Vec<ProjectiveState>,
        jump_costs: Vec<f64>,
        epsilon: f64,
    ) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a chain needs at least two points, got {}",
                points.len()
            )));
        }
        if jump_costs.len() != points.len() - 1 {
            return Err(Error::InvalidInput(format!(
                "{} points need {} jump costs, got {}",
                points.len(),
                points.len() - 1,
                jump_costs.len()
            )));
        }
        let total: f64 = jump_costs.iter().sum();
        if total.is_nan() || epsilon.is_nan() || total >= epsilon {
            return Err(Error::InvalidInput(format!(
                "jump costs sum to {total}, not below epsilon = {epsilon}"
            )));
        }
        Ok(Self {
            points,
            jump_costs,
            epsilon,
        })
    }

    /// Evaluates T at each point and assembles the chain, rejecting sequences
    /// whose total jump cost reaches epsilon.
    pub fn evaluate(
        points: Vec<ProjectiveState>,
        dynamics: &Dynamics,
        epsilon: f64,
    ) -> Result<Self> {
        let (jump_costs, _) = chain_cost(&points, dynamics)?;
        Self::from_parts(points, jump_costs, epsilon)
    }

    pub fn points(&self) -> &[ProjectiveState] {
        &self.points
    }

    pub fn jump_costs(&self) -> &[f64] {
        &self.jump_costs
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn total_cost(&self) -> f64 {
        self.jump_costs.iter().sum()
    }

    /// Number of jumps n.
    pub fn len(&self) -> usize {
        self.jump_costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_costs.is_empty()
    }
}

/// Per-step jump costs d(T(x_i), x_{i+1}) and their sum.
pub fn chain_cost(points: &[ProjectiveState], dynamics: &Dynamics) -> Result<(Vec<f64>, f64)> {
    if points.len() < 2 {
        return Err(Error::InvalidInput("need at least two points".into()));
    }
    let mut jump_costs = Vec::with_capacity(points.len() - 1);
    for pair in points.windows(2) {
        let image = dynamics.map(&pair[0])?;
        jump_costs.push(fs_distance(&image, &pair[1])?);
    }
    let total = jump_costs.iter().sum();
    Ok((jump_costs, total))
}

/// Construction parameters for a sampled net.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetParams {
    pub node_count: usize,
    pub thinning_radius: f64,
    pub seed: u64,
    /// Pool size multiplier for farthest-point thinning.
    pub oversample: usize,
}

impl NetParams {
    pub fn new(node_count: usize, thinning_radius: f64, seed: u64) -> Self {
        Self {
            node_count,
            thinning_radius,
            seed,
            oversample: 20,
        }
    }
}

/// Above these sizes the edge set is sparsified to the k nearest nodes of
/// each node's image.
const DENSE_DIM_LIMIT: usize = 4;
const DENSE_NODE_LIMIT: usize = 500;
const SPARSE_NEIGHBORS: usize = 16;

#[derive(Debug, Clone)]
enum EdgePolicy {
    Dense,
    Sparse(Vec<Vec<(usize, f64)>>),
}

/// A finite carrier for minimal-cost search: nodes with pairwise distance at
/// least the thinning radius, their realized images, and the implied edge
/// costs (i -> j) = d(T(node_i), node_j).
#[derive(Debug, Clone)]
pub struct StateNet {
    nodes: Vec<ProjectiveState>,
    images: Vec<ProjectiveState>,
    labels: Vec<OutcomeLabel>,
    edges: EdgePolicy,
    thinning_radius: f64,
}

impl StateNet {
    /// Samples complex-Gaussian states, thins them to the requested radius by
    /// farthest-point traversal, and precomputes the realized images.
    pub fn sample(dynamics: &Dynamics, params: &NetParams) -> Result<Self> {
        if params.node_count < 2 {
            return Err(Error::InvalidInput(
                "a net needs at least two nodes".into(),
            ));
        }
        let mut rng = sampling::rng_from_seed(params.seed);
        let pool_size = params.node_count.saturating_mul(params.oversample.max(1));
        let pool: Vec<ProjectiveState> = (0..pool_size)
            .map(|_| sampling::random_state(dynamics.dim(), &mut rng))
            .collect();

        let mut selected = vec![0usize];
        let mut min_dist: Vec<f64> = pool
            .iter()
            .map(|s| fs_distance(s, &pool[0]).expect("same space"))
            .collect();
        while selected.len() < params.node_count {
            let (far_idx, far_dist) = min_dist
                .iter()
                .enumerate()
                .fold((0, -1.0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
            if far_dist < params.thinning_radius {
                break;
            }
            selected.push(far_idx);
            for (i, s) in pool.iter().enumerate() {
                let d = fs_distance(s, &pool[far_idx]).expect("same space");
                if d < min_dist[i] {
                    min_dist[i] = d;
                }
            }
        }
        if selected.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "thinning radius {} left fewer than two nodes",
                params.thinning_radius
            )));
        }
        let nodes: Vec<ProjectiveState> = selected.into_iter().map(|i| pool[i].clone()).collect();
        Self::from_nodes(dynamics, nodes, params.thinning_radius)
    }

    /// Builds a net from explicit states (no thinning), e.g. hand-built toys
    /// or the members of an extracted set.
    pub fn from_states(dynamics: &Dynamics, nodes: Vec<ProjectiveState>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidInput(
                "a net needs at least two nodes".into(),
            ));
        }
        Self::from_nodes(dynamics, nodes, 0.0)
    }

    fn from_nodes(
        dynamics: &Dynamics,
        nodes: Vec<ProjectiveState>,
        thinning_radius: f64,
    ) -> Result<Self> {
        let mut images = Vec::with_capacity(nodes.len());
        let mut labels = Vec::with_capacity(nodes.len());
        for node in &nodes {
            let (image, label) = dynamics.step(node)?;
            images.push(image);
            labels.push(label);
        }
        let n = nodes.len();
        let edges = if dynamics.dim() <= DENSE_DIM_LIMIT && n <= DENSE_NODE_LIMIT {
            EdgePolicy::Dense
        } else {
            let mut neighbors = Vec::with_capacity(n);
            for image in &images {
                let mut costs: Vec<(usize, f64)> = nodes
                    .iter()
                    .enumerate()
                    .map(|(j, node)| (j, fs_distance(image, node).expect("same space")))
                    .collect();
                costs.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                costs.truncate(SPARSE_NEIGHBORS);
                neighbors.push(costs);
            }
            EdgePolicy::Sparse(neighbors)
        };
        Ok(Self {
            nodes,
            images,
            labels,
            edges,
            thinning_radius,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &ProjectiveState {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[ProjectiveState] {
        &self.nodes
    }

    pub fn image(&self, i: usize) -> &ProjectiveState {
        &self.images[i]
    }

    pub fn label(&self, i: usize) -> OutcomeLabel {
        self.labels[i]
    }

    pub fn thinning_radius(&self) -> f64 {
        self.thinning_radius
    }

    /// Cost of the single chain step node_i -> node_j.
    pub fn edge_cost(&self, i: usize, j: usize) -> f64 {
        fs_distance(&self.images[i], &self.nodes[j]).expect("same space")
    }

    /// Index and distance of the node nearest to `state`.
    pub fn nearest(&self, state: &ProjectiveState) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (i, node) in self.nodes.iter().enumerate() {
            let d = fs_distance(node, state).expect("same space");
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    fn for_each_edge(&self, i: usize, mut visit: impl FnMut(usize, f64)) {
        match &self.edges {
            EdgePolicy::Dense => {
                for j in 0..self.nodes.len() {
                    visit(j, self.edge_cost(i, j));
                }
            }
            EdgePolicy::Sparse(neighbors) => {
                for &(j, cost) in &neighbors[i] {
                    visit(j, cost);
                }
            }
        }
    }
}

#[derive(Debug, PartialEq)]
struct HeapEntry {
    cost: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap and we want the cheapest first.
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest-path distances (and predecessor tree) under
/// non-negative jump costs, pruned at `cap` when given.
fn shortest_paths_from(net: &StateNet, source: usize, cap: Option<f64>) -> (Vec<f64>, Vec<usize>) {
    let n = net.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry {
        cost: 0.0,
        node: source,
    });
    while let Some(HeapEntry { cost, node }) = heap.pop() {
        if settled[node] {
            continue;
        }
        settled[node] = true;
        net.for_each_edge(node, |next, edge| {
            let alt = cost + edge;
            if let Some(cap) = cap {
                if alt > cap {
                    return;
                }
            }
            if !settled[next] && alt < dist[next] {
                dist[next] = alt;
                prev[next] = node;
                heap.push(HeapEntry {
                    cost: alt,
                    node: next,
                });
            }
        });
    }
    (dist, prev)
}

/// Single-source minimal costs to every node (infinite where unreachable).
/// The batch form of `min_cost_search` for all-pairs queries.
pub fn min_costs_from(net: &StateNet, source: usize, cap: Option<f64>) -> Vec<f64> {
    assert!(source < net.len(), "node out of range");
    shortest_paths_from(net, source, cap).0
}

/// Minimal forward cost between two net nodes, with the realizing path.
///
/// `source == target` is the reflexive case and costs 0. Otherwise the
/// returned path has at least one jump, its cost is the left-to-right sum of
/// its edge costs, and it is a valid strong chain for any epsilon above it.
pub fn min_cost_search(
    net: &StateNet,
    source: usize,
    target: usize,
    cap: Option<f64>,
) -> Result<(f64, Vec<usize>)> {
    assert!(source < net.len() && target < net.len(), "node out of range");
    if source == target {
        return Ok((0.0, vec![source]));
    }
    let (dist, prev) = shortest_paths_from(net, source, cap);
    if !dist[target].is_finite() {
        return Err(Error::Infeasible {
            from_node: source,
            to_node: target,
            cap,
        });
    }
    let mut path = vec![target];
    let mut at = target;
    while at != source {
        at = prev[at];
        path.push(at);
    }
    path.reverse();
    Ok((dist[target], path))
}

/// Both directions of the estimated minimal cost for one state pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairReversibility {
    pub forward_node: usize,
    pub backward_node: usize,
    /// Distances from the query states to their snapped net nodes.
    pub snap_errors: (f64, f64),
    /// Estimated d(u -> v); infinite when no path exists under the cap.
    pub forward_cost: f64,
    /// Estimated d(v -> u).
    pub backward_cost: f64,
    /// Both directions achievable below epsilon: no arrow of time at this
    /// scale for this pair.
    pub symmetric: bool,
}

/// Estimates forward and backward minimal costs for each pair, snapped to the
/// nearest net nodes. A set is operationally reversible at scale epsilon when
/// every pair reports `symmetric`.
pub fn reversibility_report(
    net: &StateNet,
    pairs: &[(ProjectiveState, ProjectiveState)],
    epsilon: f64,
    cap: Option<f64>,
) -> Vec<PairReversibility> {
    pairs
        .iter()
        .map(|(u, v)| {
            let (nu, du) = net.nearest(u);
            let (nv, dv) = net.nearest(v);
            let forward_cost = match min_cost_search(net, nu, nv, cap) {
                Ok((c, _)) => c,
                Err(_) => f64::INFINITY,
            };
            let backward_cost = match min_cost_search(net, nv, nu, cap) {
                Ok((c, _)) => c,
                Err(_) => f64::INFINITY,
            };
            PairReversibility {
                forward_node: nu,
                backward_node: nv,
                snap_errors: (du, dv),
                forward_cost,
                backward_cost,
                symmetric: forward_cost < epsilon && backward_cost < epsilon,
            }
        })
        .collect()
}

/// A chain realized by steering: one perturbation window per jump, applied on
/// the unitary segment after each arrival, at windows (k+1/3, k+2/3).
#[derive(Debug, Clone)]
pub struct SteeredRun {
    chain: StrongChain,
    plans: Vec<SteeringPlan>,
    /// Arrival states w_k = T(x_{k-1}) at integer times 1..=n.
    arrivals: Vec<ProjectiveState>,
    /// Closed-form residual of each window (achieved vs target).
    step_residuals: Vec<f64>,
    total_cost: f64,
    final_error: f64,
}

impl SteeredRun {
    pub fn chain(&self) -> &StrongChain {
        &self.chain
    }

    pub fn plans(&self) -> &[SteeringPlan] {
        &self.plans
    }

    pub fn arrivals(&self) -> &[ProjectiveState] {
        &self.arrivals
    }

    pub fn step_residuals(&self) -> &[f64] {
        &self.step_residuals
    }

    /// Sum of the plans' costs; equals the chain's total jump cost because
    /// each window costs exactly its jump's Fubini-Study angle.
    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    pub fn final_error(&self) -> f64 {
        self.final_error
    }

    /// The full [0, n+1] propagator with every window in place:
    /// W = W_n ... W_1 U(1,0), W_k = U(k+1, tau_k^+) V_k U(tau_k^-, k).
    /// With a blank-only itinerary this carries the chain start to U x_n.
    pub fn composite_propagator(&self, dynamics: &Dynamics) -> UnitaryMatrix {
        let flow = dynamics.flow();
        let mut acc = flow.at(1.0, 0.0);
        for (i, plan) in self.plans.iter().enumerate() {
            let k = (i + 1) as f64;
            let (lo, hi) = plan.window();
            let w_k = flow
                .at(k + 1.0, hi)
                .compose(plan.closed_form_v())
                .compose(&flow.at(lo, k));
            acc = w_k.compose(&acc);
        }
        acc
    }

    /// Integrates every window's Schrodinger equation as an independent check
    /// of the closed forms.
    pub fn verify(&self, dynamics: &Dynamics, steps: usize) -> Vec<IntegrationReport> {
        self.plans
            .iter()
            .map(|p| verify_steering_by_integration(p, dynamics.hamiltonian(), steps))
            .collect()
    }
}

/// Builds the composite steering protocol along a strong chain.
///
/// For jump k (1-based), the arrival w_k = T(x_{k-1}) is steered during
/// (k+1/3, k+2/3) onto the freely evolved chain point U(k+2/3, k) x_k, at cost
/// exactly the jump's angle. Collapse outcomes along the steered run are the
/// rule's outcomes at the chain points themselves: the windows reproduce those
/// states exactly, and evaluating the rule there keeps the run deterministic.
pub fn steer_along_chain(chain: &StrongChain, dynamics: &Dynamics) -> Result<SteeredRun> {
    let points = chain.points();
    let n = chain.len();
    let flow = dynamics.flow();
    let mut plans = Vec::with_capacity(n);
    let mut arrivals = Vec::with_capacity(n);
    let mut step_residuals = Vec::with_capacity(n);

    for i in 0..n {
        let k = (i + 1) as f64;
        let arrival = dynamics.map(&points[i])?;
        let target = flow
            .at(k + 2.0 / 3.0, k)
            .apply_state(&points[i + 1])?;
        let plan = synthesize_steering(
            &arrival,
            dynamics.hamiltonian(),
            k,
            k + 1.0 / 3.0,
            k + 2.0 / 3.0,
            &target,
        )?;
        step_residuals.push(plan.closed_form_residual());
        arrivals.push(arrival);
        plans.push(plan);
    }

    let total_cost = plans.iter().map(|p| p.cost()).sum();
    // Pull the last window's achieved state back to the time-n frame and
    // compare with the chain's endpoint.
    let final_error = match plans.last() {
        Some(plan) => {
            let achieved = plan.closed_form_achieved();
            let back = flow
                .at(n as f64, n as f64 + 2.0 / 3.0)
                .apply_state(&achieved)?;
            fs_distance(&back, &points[n])?
        }
        None => 0.0,
    };

    Ok(SteeredRun {
        chain: chain.clone(),
        plans,
        arrivals,
        step_residuals,
        total_cost,
        final_error,
    })
}

/// One scale of the naive cover-scan diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScaleReport {
    pub scale: f64,
    /// Center of the first cell visited twice.
    pub center: ProjectiveState,
    pub first_visit: usize,
    pub second_visit: usize,
    /// Distance between the two visits (the epsilon-loop's closing gap).
    pub return_gap: f64,
    /// Whether this scale's cell ball lies inside the previous scale's.
    pub nests_previous: bool,
}

/// Scans the orbit at each scale for the first cell (ball of radius scale/2)
/// visited twice, and reports whether the chosen cells nest across scales.
/// For discontinuous selectors the repeating cell typically drifts, so
/// nesting is expected to fail at some scale; a periodic orbit revisits the
/// same cell at every scale.
pub fn grid_refinement_diagnostic(
    dynamics: &Dynamics,
    x0: &ProjectiveState,
    scales: &[f64],
    budget_per_scale: usize,
) -> Result<Vec<GridScaleReport>> {
    if scales.is_empty() {
        return Err(Error::InvalidInput("need at least one scale".into()));
    }
    let mut trace = vec![x0.clone()];
    let mut reports: Vec<GridScaleReport> = Vec::with_capacity(scales.len());

    for &scale in scales {
        if scale.is_nan() || scale <= 0.0 {
            return Err(Error::InvalidInput(format!("scale {scale} must be positive")));
        }
        let radius = scale / 2.0;
        // Cell centers are trace indices, in creation order.
        let mut centers: Vec<usize> = Vec::new();
        let mut hit: Option<(usize, usize)> = None;
        for t in 0..=budget_per_scale {
            if trace.len() <= t {
                let next = dynamics.map(trace.last().unwrap())?;
                trace.push(next);
            }
            let point = &trace[t];
            let mut claimed = false;
            for &c in &centers {
                if fs_distance(&trace[c], point)? <= radius {
                    hit = Some((c, t));
                    claimed = true;
                    break;
                }
            }
            if claimed {
                break;
            }
            centers.push(t);
        }
        let (center_idx, second_visit) = match hit {
            Some(pair) => pair,
            None => {
                return Err(Error::Budget {
                    what: format!(
                        "no cell revisited within {budget_per_scale} steps at scale {scale}"
                    ),
                })
            }
        };
        let center = trace[center_idx].clone();
        let return_gap = fs_distance(&center, &trace[second_visit])?;
        let nests_previous = match reports.last() {
            None => true,
            Some(prev) => {
                let shift = fs_distance(&prev.center, &center)?;
                shift <= (prev.scale - scale) / 2.0
            }
        };
        reports.push(GridScaleReport {
            scale,
            center,
            first_visit: center_idx,
            second_visit,
            return_gap,
            nests_previous,
        });
    }
    Ok(reports)
}
