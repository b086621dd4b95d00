//! Command implementations. Each writes its artifacts under the scenario's
//! output directory and prints a one-line summary; reports are deterministic
//! given identical scenarios and seeds.

use branchsim::{
    certify_recurrence, chain_cost, detect_periodicity, extract_transitive_set,
    grid_refinement_diagnostic, min_cost_search, realize_itinerary, reversibility_report,
    run_stages, steer_along_chain, synthesize_steering, verify_steering_by_integration,
    ProjectiveState, StrongChain,
};
use serde::Serialize;

use crate::error::CliError;
use crate::report::{
    self, certificate_csv, chain_csv, grid_csv, states_csv, CertificateJson, ChainJson,
    GridScaleJson, PairJson, PlanJson, TransitiveSetJson, VerificationJson,
};
use crate::scenario::Scenario;

#[derive(Serialize)]
struct SimulateJson {
    steps: usize,
    itinerary: Vec<usize>,
    compatibility_ok: bool,
    states_file: String,
}

pub fn cmd_simulate(scenario: &Scenario, x0: &str, steps: usize) -> Result<(), CliError> {
    if steps == 0 {
        return Err(CliError::Config("need at least one step".into()));
    }
    let x0 = scenario.parse_state(x0)?;
    let dynamics = &scenario.dynamics;
    // Step manually so an inadmissible selection aborts with its step index.
    let mut states = vec![x0];
    let mut itinerary = Vec::with_capacity(steps);
    for step in 0..steps {
        match dynamics.step(states.last().unwrap()) {
            Ok((next, label)) => {
                states.push(next);
                itinerary.push(label);
            }
            Err(e) => {
                return Err(CliError::Precondition(format!("at step {step}: {e}")));
            }
        }
    }

    // On-the-fly compatibility check: the shifted itinerary equals the
    // successor state's own itinerary, exactly.
    let compatibility_ok = if steps >= 2 {
        let (shifted, _) = realize_itinerary(
            &states[1],
            dynamics.step_unitary(),
            dynamics.observable(),
            dynamics.rule(),
            steps - 1,
        )?;
        itinerary[1..] == shifted[..]
    } else {
        true
    };

    let dir = &scenario.output_dir;
    if scenario.csv_enabled {
        report::write_text(dir, "states.csv", &states_csv(&states, &itinerary))?;
    }
    let summary = SimulateJson {
        steps,
        itinerary: itinerary.iter().map(|l| l.value()).collect(),
        compatibility_ok,
        states_file: "states.csv".into(),
    };
    let path = report::write_json(dir, "simulate_report.json", &summary)?;
    println!(
        "simulate: {} steps, compatibility {}, report {}",
        steps,
        if compatibility_ok { "ok" } else { "BROKEN" },
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SteerJson {
    plan: PlanJson,
    within_tolerance: bool,
    verification: VerificationJson,
}

pub fn cmd_steer(
    scenario: &Scenario,
    x0: &str,
    target: &str,
    window: Option<(f64, f64, f64)>,
    steps: usize,
) -> Result<(), CliError> {
    let u = scenario.parse_state(x0)?;
    let v = scenario.parse_state(target)?;
    let (tau0, tau, tau1) = window.unwrap_or((1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0));
    let h = scenario.dynamics.hamiltonian();
    let plan = synthesize_steering(&u, h, tau0, tau, tau1, &v)?;
    let verification = verify_steering_by_integration(&plan, h, steps.max(100));

    let summary = SteerJson {
        within_tolerance: plan.closed_form_residual() < scenario.tolerances.steering_residual,
        plan: PlanJson::from_plan(&plan),
        verification: VerificationJson::from_report(steps.max(100), &verification),
    };
    let path = report::write_json(&scenario.output_dir, "steer_report.json", &summary)?;
    println!(
        "steer: delta {:.6}, cost {:.6}, closed-form residual {:.2e}, ODE target error {:.2e}, report {}",
        plan.delta(),
        plan.cost(),
        plan.closed_form_residual(),
        verification.target_error,
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ChainSearchJson {
    epsilon: f64,
    source_node: usize,
    target_node: usize,
    snap_errors: [f64; 2],
    cost: f64,
    path: Vec<usize>,
    revalidated_total: f64,
    revalidation_ok: bool,
    chain: Option<ChainJson>,
}

pub fn cmd_chain_search(
    scenario: &Scenario,
    source: &str,
    target: &str,
    epsilon: f64,
) -> Result<(), CliError> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(CliError::Config("epsilon must be positive".into()));
    }
    let dynamics = &scenario.dynamics;
    let net = scenario
        .build_net()?
        .ok_or_else(|| CliError::Config("scenario has no net section".into()))?;
    let source_state = scenario.parse_state(source)?;
    let target_state = scenario.parse_state(target)?;
    let (s, ds) = net.nearest(&source_state);
    let (t, dt) = net.nearest(&target_state);
    let cap = scenario.budgets.cost_cap.unwrap_or(epsilon);
    let (cost, path) = min_cost_search(&net, s, t, Some(cap))?;
    if let Some(path_cap) = scenario.budgets.path_cap {
        if path.len().saturating_sub(1) > path_cap {
            return Err(CliError::Budget(format!(
                "cheapest path uses {} jumps, above the path cap {path_cap}",
                path.len() - 1
            )));
        }
    }

    let points: Vec<ProjectiveState> = path.iter().map(|&i| net.node(i).clone()).collect();
    let (chain, revalidated_total) = if points.len() >= 2 {
        let chain = StrongChain::evaluate(points, dynamics, epsilon)?;
        let (_, total) = chain_cost(chain.points(), dynamics)?;
        (Some(chain), total)
    } else {
        (None, 0.0) // reflexive query: the empty itinerary costs nothing
    };

    let dir = &scenario.output_dir;
    if let Some(chain) = &chain {
        if scenario.csv_enabled {
            report::write_text(dir, "chain.csv", &chain_csv(chain, None))?;
        }
    }
    let summary = ChainSearchJson {
        epsilon,
        source_node: s,
        target_node: t,
        snap_errors: [ds, dt],
        cost,
        path,
        revalidated_total,
        revalidation_ok: (cost - revalidated_total).abs()
            < scenario.tolerances.chain_revalidation,
        chain: chain.as_ref().map(ChainJson::from_chain),
    };
    let path = report::write_json(dir, "chain_search_report.json", &summary)?;
    println!(
        "chain-search: cost {:.6} over {} hops (revalidated {:.6}), report {}",
        cost,
        summary.path.len().saturating_sub(1),
        revalidated_total,
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct RecurrenceJson {
    orbit_len: usize,
    max_limit_stages: usize,
    bucket_radius: f64,
    m_min: usize,
    stage_points: usize,
    limit_stages: usize,
    terminated_on_revisit: bool,
    /// Exact period of the starting point within the horizon budget, if any.
    period: Option<usize>,
    certificate: CertificateJson,
}

pub fn cmd_recurrence(scenario: &Scenario, x0: &str) -> Result<(), CliError> {
    let x0 = scenario.parse_state(x0)?;
    let dynamics = &scenario.dynamics;
    let seq = run_stages(
        &x0,
        dynamics,
        scenario.stage_budget(),
        scenario.recurrence.bucket_radius,
        scenario.recurrence.m_min,
    )?;
    let cert = certify_recurrence(&seq, dynamics, &scenario.scales)?;
    let period = detect_periodicity(&x0, dynamics, scenario.budgets.horizon)?.map(|(p, _)| p);

    let dir = &scenario.output_dir;
    if scenario.csv_enabled {
        report::write_text(dir, "certificate.csv", &certificate_csv(&cert))?;
    }
    let summary = RecurrenceJson {
        orbit_len: scenario.budgets.orbit_len,
        max_limit_stages: scenario.budgets.max_limit_stages,
        bucket_radius: scenario.recurrence.bucket_radius,
        m_min: scenario.recurrence.m_min,
        stage_points: seq.len(),
        limit_stages: seq.limit_events().len(),
        terminated_on_revisit: matches!(
            seq.termination(),
            branchsim::Termination::ExactRevisit { .. }
        ),
        period,
        certificate: CertificateJson::from_certificate(&cert),
    };
    let path = report::write_json(dir, "recurrence_report.json", &summary)?;
    let certified = cert.loops().iter().filter(|l| l.chain.is_some()).count();
    println!(
        "recurrence: {}/{} scales certified, nested {}, report {}",
        certified,
        cert.loops().len(),
        cert.nested(),
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct PhaseStatus {
    status: String,
}

impl PhaseStatus {
    fn ok() -> Self {
        Self {
            status: "ok".into(),
        }
    }

    fn failed(e: impl std::fmt::Display) -> Self {
        Self {
            status: format!("failed: {e}"),
        }
    }

    fn skipped() -> Self {
        Self {
            status: "skipped".into(),
        }
    }
}

#[derive(Serialize)]
struct ReversibilityJson {
    epsilon: f64,
    phase_net: PhaseStatus,
    phase_stages: PhaseStatus,
    phase_certificate: PhaseStatus,
    phase_set: PhaseStatus,
    phase_pairwise: PhaseStatus,
    phase_probe_pairs: PhaseStatus,
    phase_spot_check: PhaseStatus,
    certificate: Option<CertificateJson>,
    set: Option<TransitiveSetJson>,
    set_reversible: Option<bool>,
    set_arrow_present: Option<bool>,
    probe_pairs: Vec<PairJson>,
    probe_arrow_present: Option<bool>,
    spot_check_chain: Option<ChainJson>,
    spot_check_total_cost: Option<f64>,
    spot_check_final_error: Option<f64>,
    spot_check_verifications: Vec<VerificationJson>,
}

/// The full pipeline: net, stages, certificates, extracted set, pairwise
/// reversibility, probe pairs, and one ODE-verified steered run. Phase
/// failures are recorded and later phases marked skipped instead of aborting.
pub fn cmd_reversibility(
    scenario: &Scenario,
    x0: &str,
    epsilon_override: Option<f64>,
) -> Result<(), CliError> {
    let x0 = scenario.parse_state(x0)?;
    let dynamics = &scenario.dynamics;
    let epsilon = epsilon_override
        .or_else(|| scenario.scales.last().copied())
        .ok_or_else(|| CliError::Config("no epsilon: scenario scales are empty".into()))?;

    let mut out = ReversibilityJson {
        epsilon,
        phase_net: PhaseStatus::skipped(),
        phase_stages: PhaseStatus::skipped(),
        phase_certificate: PhaseStatus::skipped(),
        phase_set: PhaseStatus::skipped(),
        phase_pairwise: PhaseStatus::skipped(),
        phase_probe_pairs: PhaseStatus::skipped(),
        phase_spot_check: PhaseStatus::skipped(),
        certificate: None,
        set: None,
        set_reversible: None,
        set_arrow_present: None,
        probe_pairs: Vec::new(),
        probe_arrow_present: None,
        spot_check_chain: None,
        spot_check_total_cost: None,
        spot_check_final_error: None,
        spot_check_verifications: Vec::new(),
    };

    // Phase: net.
    let net = match scenario.build_net() {
        Ok(Some(net)) => {
            out.phase_net = PhaseStatus::ok();
            Some(net)
        }
        Ok(None) => {
            out.phase_net = PhaseStatus::failed("scenario has no net section");
            None
        }
        Err(e) => {
            out.phase_net = PhaseStatus::failed(e);
            None
        }
    };

    // Phase: recurrence stages.
    let seq = match run_stages(
        &x0,
        dynamics,
        scenario.stage_budget(),
        scenario.recurrence.bucket_radius,
        scenario.recurrence.m_min,
    ) {
        Ok(seq) => {
            out.phase_stages = PhaseStatus::ok();
            Some(seq)
        }
        Err(e) => {
            out.phase_stages = PhaseStatus::failed(e);
            None
        }
    };

    // Phase: per-scale certificates.
    if let Some(seq) = &seq {
        match certify_recurrence(seq, dynamics, &scenario.scales) {
            Ok(cert) => {
                out.phase_certificate = PhaseStatus::ok();
                out.certificate = Some(CertificateJson::from_certificate(&cert));
            }
            Err(e) => out.phase_certificate = PhaseStatus::failed(e),
        }
    }

    // Phase: transitive set extraction and pairwise reversibility.
    if let Some(seq) = &seq {
        match extract_transitive_set(seq, dynamics, epsilon, scenario.budgets.size_cap) {
            Ok(set) => {
                out.phase_set = PhaseStatus::ok();
                let mut max_cost = 0.0f64;
                let mut max_asymmetry = 0.0f64;
                for (i, row) in set.pairwise_costs().iter().enumerate() {
                    for (j, &cost) in row.iter().enumerate() {
                        if i == j {
                            continue;
                        }
                        max_cost = max_cost.max(cost);
                        let reverse = set.pairwise_costs()[j][i];
                        max_asymmetry = max_asymmetry.max((cost - reverse).abs());
                    }
                }
                out.set_reversible = Some(max_cost < epsilon);
                out.set_arrow_present =
                    Some(max_asymmetry > scenario.tolerances.asymmetry_margin);
                out.set = Some(TransitiveSetJson::from_set(&set));
                out.phase_pairwise = PhaseStatus::ok();
            }
            Err(e) => out.phase_set = PhaseStatus::failed(e),
        }
    }

    // Phase: scenario probe pairs over the sampled net.
    if !scenario.pairs.is_empty() {
        match &net {
            Some(net) => {
                let reports = reversibility_report(net, &scenario.pairs, epsilon, None);
                out.probe_arrow_present = Some(reports.iter().any(|p| {
                    (p.forward_cost - p.backward_cost).abs()
                        > scenario.tolerances.asymmetry_margin
                }));
                out.probe_pairs = reports.iter().map(PairJson::from_pair).collect();
                out.phase_probe_pairs = PhaseStatus::ok();
            }
            None => out.phase_probe_pairs = PhaseStatus::failed("net unavailable"),
        }
    }

    // Phase: one steered run over the cheapest nontrivial net pair.
    if let Some(net) = &net {
        let mut best: Option<(f64, Vec<usize>)> = None;
        for s in (0..net.len()).step_by(3) {
            for t in 0..net.len() {
                if s == t {
                    continue;
                }
                if let Ok((cost, path)) = min_cost_search(net, s, t, Some(epsilon * 0.9)) {
                    if cost > 0.0 && best.as_ref().is_none_or(|(b, _)| cost < *b) {
                        best = Some((cost, path));
                    }
                }
            }
        }
        match best {
            Some((_, path)) => {
                let points: Vec<ProjectiveState> =
                    path.iter().map(|&i| net.node(i).clone()).collect();
                match StrongChain::evaluate(points, dynamics, epsilon)
                    .and_then(|chain| steer_along_chain(&chain, dynamics))
                {
                    Ok(run) => {
                        out.spot_check_chain = Some(ChainJson::from_chain(run.chain()));
                        out.spot_check_total_cost = Some(run.total_cost());
                        out.spot_check_final_error = Some(run.final_error());
                        let steps = scenario.budgets.verify_steps;
                        out.spot_check_verifications = run
                            .verify(dynamics, steps)
                            .iter()
                            .map(|r| VerificationJson::from_report(steps, r))
                            .collect();
                        if scenario.csv_enabled {
                            report::write_text(
                                &scenario.output_dir,
                                "steered_run.csv",
                                &chain_csv(run.chain(), Some(&run)),
                            )?;
                        }
                        out.phase_spot_check = PhaseStatus::ok();
                    }
                    Err(e) => out.phase_spot_check = PhaseStatus::failed(e),
                }
            }
            None => {
                out.phase_spot_check =
                    PhaseStatus::failed(format!("no nontrivial pair below {epsilon}"))
            }
        }
    }

    let path = report::write_json(&scenario.output_dir, "reversibility_report.json", &out)?;
    println!(
        "reversibility: set {} (members {:?}, max pair cost {:?}), probe arrow {:?}, report {}",
        out.set_reversible
            .map_or("unavailable".to_string(), |ok| if ok {
                "reversible".into()
            } else {
                "NOT reversible".into()
            }),
        out.set.as_ref().map(|s| s.member_count),
        out.set.as_ref().map(|s| s.max_pairwise_cost),
        out.probe_arrow_present,
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct GridJson {
    budget_per_scale: usize,
    non_nesting_transitions: usize,
    scales: Vec<GridScaleJson>,
}

pub fn cmd_grid_diagnostic(
    scenario: &Scenario,
    x0: &str,
    max_scale_exponent: i32,
) -> Result<(), CliError> {
    if max_scale_exponent < 1 {
        return Err(CliError::Config(
            "max scale exponent must be at least 1".into(),
        ));
    }
    let x0 = scenario.parse_state(x0)?;
    let scales: Vec<f64> = (1..=max_scale_exponent).map(|k| 2f64.powi(-k)).collect();
    let reports = grid_refinement_diagnostic(
        &scenario.dynamics,
        &x0,
        &scales,
        scenario.budgets.grid_budget,
    )?;

    let dir = &scenario.output_dir;
    if scenario.csv_enabled {
        report::write_text(dir, "grid.csv", &grid_csv(&reports))?;
    }
    let non_nesting = reports.iter().filter(|r| !r.nests_previous).count();
    let summary = GridJson {
        budget_per_scale: scenario.budgets.grid_budget,
        non_nesting_transitions: non_nesting,
        scales: reports.iter().map(GridScaleJson::from_report).collect(),
    };
    let path = report::write_json(dir, "grid_report.json", &summary)?;
    println!(
        "grid-diagnostic: {} scales, {} non-nesting transitions, report {}",
        reports.len(),
        non_nesting,
        path.display()
    );
    Ok(())
}
