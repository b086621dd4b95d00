//! Minimal-energy unitary steering between nearby states.
//!
//! Given the freely evolved state w = U(t1,t0)u and a target v at
//! Fubini-Study angle delta < pi/2, the rank-2 skew-Hermitian generator
//! K = (arccos|⟨v,w⟩| / sqrt(1 − |⟨v,w⟩|²)) (|v⟩⟨w| − |w⟩⟨v|) rotates w
//! exactly onto v. Conjugating its log through the free flow yields the
//! self-adjoint perturbation window dH(t) = U(t,tau) H~ U(t,tau)† with
//! H~ = (i/dtau) log(U(t1,tau)† e^K U(t1,tau)), whose propagator equals
//! e^K U(t1,tau) in closed form and whose integrated cost is exactly delta.
//! Verification integrates the time-ordered Schrodinger equation and
//! quadratures the cost on the same grid.

use num_complex::Complex64;

use crate::eigen::CMatrix;
use crate::error::{Error, Result};
use crate::qstate::{
    fs_angle_unit_vectors, fs_distance, operator_norm, skew_exp, unitary_log, HermitianMatrix,
    Propagator, ProjectiveState, UnitaryMatrix,
};
use crate::tol;

/// A synthesized steering window together with the context needed to replay
/// and verify it.
#[derive(Debug, Clone)]
pub struct SteeringPlan {
    /// Rank <= 2 skew-Hermitian rotation generator K.
    rotation: CMatrix,
    /// Conjugation seed of the perturbation; constant operator norm delta/dtau.
    h_tilde: HermitianMatrix,
    /// Perturbation support (tau_minus, tau_plus).
    window: (f64, f64),
    /// Time at which `source` is given.
    start_time: f64,
    /// Fubini-Study angle between the freely evolved source and the target.
    delta: f64,
    /// Integrated energetic cost; equals delta for this construction.
    cost: f64,
    /// e^K U(tau_plus, tau_minus): the windowed propagator in closed form.
    closed_form_v: UnitaryMatrix,
    /// U(tau_minus, start_time): free evolution before the window opens.
    pre_window: UnitaryMatrix,
    source: ProjectiveState,
    target: ProjectiveState,
}

impl SteeringPlan {
    pub fn rotation(&self) -> &CMatrix {
        &self.rotation
    }

    pub fn h_tilde(&self) -> &HermitianMatrix {
        &self.h_tilde
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn closed_form_v(&self) -> &UnitaryMatrix {
        &self.closed_form_v
    }

    pub fn pre_window(&self) -> &UnitaryMatrix {
        &self.pre_window
    }

    pub fn source(&self) -> &ProjectiveState {
        &self.source
    }

    pub fn target(&self) -> &ProjectiveState {
        &self.target
    }

    /// The state the closed-form propagator reaches from the source.
    pub fn closed_form_achieved(&self) -> ProjectiveState {
        let staged = self.pre_window.apply_vector(self.source.amplitudes());
        ProjectiveState::from_vector(self.closed_form_v.apply_vector(&staged))
            .expect("unitary image of a unit vector")
    }

    /// Fubini-Study distance between the closed-form achieved state and the
    /// target; the synthesis contract keeps this below ~1e-9.
    pub fn closed_form_residual(&self) -> f64 {
        fs_distance(&self.closed_form_achieved(), &self.target).expect("same space")
    }
}

/// Builds the steering plan carrying [U(t1,t0)u] onto v, per the closed-form
/// construction above. Requires 0 < t0 <= tau < t1 and delta < pi/2.
pub fn synthesize_steering(
    u: &ProjectiveState,
    h: &HermitianMatrix,
    tau0: f64,
    tau: f64,
    tau1: f64,
    v: &ProjectiveState,
) -> Result<SteeringPlan> {
    if !(tau0 > 0.0 && tau0 <= tau && tau < tau1) || !tau0.is_finite() || !tau1.is_finite() {
        return Err(Error::TimeOrder { tau0, tau, tau1 });
    }
    if u.dim() != h.dim() || v.dim() != h.dim() {
        return Err(Error::Dimension {
            expected: h.dim(),
            found: if u.dim() != h.dim() { u.dim() } else { v.dim() },
        });
    }
    let dim = h.dim();
    let flow = Propagator::new(h);
    let free_full = flow.at(tau1, tau0);
    let w = free_full.apply_vector(u.amplitudes());
    let delta = fs_angle_unit_vectors(&w, v.amplitudes());

    let limit = std::f64::consts::FRAC_PI_2 - tol::NEAR_ORTHOGONAL_MARGIN;
    if delta >= limit {
        return Err(Error::NearOrthogonal { delta, limit });
    }

    let window_propagator = flow.at(tau1, tau);
    let pre_window = flow.at(tau, tau0);
    let dtau = tau1 - tau;

    if delta < 1e-12 {
        // Zero-angle branch: the free evolution already hits the target.
        return Ok(SteeringPlan {
            rotation: CMatrix::zeros(dim, dim),
            h_tilde: HermitianMatrix::zeros(dim),
            window: (tau, tau1),
            start_time: tau0,
            delta,
            cost: delta,
            closed_form_v: window_propagator,
            pre_window,
            source: u.clone(),
            target: v.clone(),
        });
    }

    // Phase-align the target so <w, v> >= 0; this changes nothing projectively
    // but makes e^K w = v an equation between vectors.
    let overlap = w.dotc(v.amplitudes());
    let aligned = v.amplitudes().map(|z| z * (overlap.conj() / overlap.norm()));

    // sqrt(1 - |<v,w>|^2) = sin(delta), with delta already computed stably.
    let coefficient = delta / delta.sin();
    let outer_vw = &aligned * w.adjoint();
    let outer_wv = &w * aligned.adjoint();
    let rotation = (outer_vw - outer_wv).map(|z| z * coefficient);

    let r = skew_exp(&rotation)?;
    let conjugated = window_propagator
        .adjoint()
        .compose(&r)
        .compose(&window_propagator);
    let h_tilde = HermitianMatrix::new(
        unitary_log(&conjugated)?
            .entries()
            .map(|z| z / dtau),
    )
    .expect("scaled Hermitian log");

    let closed_form_v = r.compose(&window_propagator);

    let plan = SteeringPlan {
        rotation,
        h_tilde,
        window: (tau, tau1),
        start_time: tau0,
        delta,
        cost: delta,
        closed_form_v,
        pre_window,
        source: u.clone(),
        target: v.clone(),
    };
    debug_assert!(plan.closed_form_residual() < 1e-9);
    debug_assert!((operator_norm(&plan.rotation) - delta).abs() < 1e-9);
    Ok(plan)
}

/// The perturbation dH(t) = U(t,tau_minus) Htilde U(t,tau_minus)† at a time
/// inside the window. Its operator norm is delta/dtau for every such t.
pub fn perturbation_at(plan: &SteeringPlan, h: &HermitianMatrix, t: f64) -> Result<HermitianMatrix> {
    let (lo, hi) = plan.window;
    if !(lo..=hi).contains(&t) {
        return Err(Error::Window { t, lo, hi });
    }
    let flow = Propagator::new(h);
    Ok(conjugated_perturbation(plan, &flow, t))
}

fn conjugated_perturbation(plan: &SteeringPlan, flow: &Propagator, t: f64) -> HermitianMatrix {
    let u = flow.at(t, plan.window.0);
    HermitianMatrix::symmetrized(u.entries() * plan.h_tilde.entries() * u.entries().adjoint())
}

/// Outcome of integrating the steered Schrodinger equation across the window.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationReport {
    /// State reached by the numerically integrated propagator.
    pub achieved: ProjectiveState,
    /// Fubini-Study distance from the achieved state to the plan's target.
    pub target_error: f64,
    /// Operator-norm gap between the integrated and closed-form propagators.
    pub propagator_error: f64,
    /// Same-grid quadrature of the integrated energetic cost; equals delta up
    /// to quadrature error.
    pub integrated_cost: f64,
}

/// Fixed-step classical 4th-order integration of
/// i dV/dt = (H + dH(t)) V over the window, with a Simpson quadrature of
/// ||dH(t)|| on the same grid.
pub fn verify_steering_by_integration(
    plan: &SteeringPlan,
    h: &HermitianMatrix,
    steps: usize,
) -> IntegrationReport {
    assert!(steps >= 1, "need at least one integration step");
    let dim = h.dim();
    let flow = Propagator::new(h);
    let (lo, hi) = plan.window;
    let dt = (hi - lo) / steps as f64;
    let minus_i = Complex64::new(0.0, -1.0);

    let mut v = CMatrix::identity(dim, dim);
    let mut cost = 0.0;
    let mut left = conjugated_perturbation(plan, &flow, lo);
    for k in 0..steps {
        let t0 = lo + k as f64 * dt;
        let mid = conjugated_perturbation(plan, &flow, t0 + 0.5 * dt);
        let right = conjugated_perturbation(plan, &flow, t0 + dt);

        let a0 = (h.entries() + left.entries()).map(|z| z * minus_i);
        let am = (h.entries() + mid.entries()).map(|z| z * minus_i);
        let a1 = (h.entries() + right.entries()).map(|z| z * minus_i);

        let k1 = &a0 * &v;
        let k2 = &am * (&v + k1.map(|z| z * (0.5 * dt)));
        let k3 = &am * (&v + k2.map(|z| z * (0.5 * dt)));
        let k4 = &a1 * (&v + k3.map(|z| z * dt));
        v += (k1 + k2.map(|z| z * 2.0) + k3.map(|z| z * 2.0) + k4).map(|z| z * (dt / 6.0));

        cost += dt / 6.0
            * (operator_norm(left.entries())
                + 4.0 * operator_norm(mid.entries())
                + operator_norm(right.entries()));
        left = right;
    }

    let staged = plan.pre_window.apply_vector(plan.source.amplitudes());
    let achieved = ProjectiveState::from_vector(&v * staged)
        .expect("integrated propagator stays near-unitary");
    let target_error = fs_distance(&achieved, &plan.target).expect("same space");
    let propagator_error = operator_norm(&(&v - plan.closed_form_v.entries()));

    IntegrationReport {
        achieved,
        target_error,
        propagator_error,
        integrated_cost: cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::CVector;
    use crate::sampling;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn zero_h(dim: usize) -> HermitianMatrix {
        HermitianMatrix::zeros(dim)
    }

    fn plus() -> ProjectiveState {
        ProjectiveState::from_vector(CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)])).unwrap()
    }

    #[test]
    fn zero_angle_plan_is_free_evolution() {
        let mut rng = sampling::rng_from_seed(1);
        let h = sampling::random_hermitian(3, 1.0, &mut rng);
        let u = sampling::random_state(3, &mut rng);
        let target = evolve_state(&h, &u, 2.0 / 3.0, 1.0 / 4.0);
        let plan =
            synthesize_steering(&u, &h, 0.25, 1.0 / 3.0, 2.0 / 3.0, &target).unwrap();
        assert!(operator_norm(plan.rotation()) < 1e-12);
        assert!(operator_norm(plan.h_tilde().entries()) < 1e-12);
        assert!(plan.cost() < 1e-12);
        let free = Propagator::new(&h).at(2.0 / 3.0, 1.0 / 3.0);
        let gap = (plan.closed_form_v().entries() - free.entries())
            .map(|z| z.norm())
            .max();
        assert!(gap < 1e-12);
        assert!(plan.closed_form_residual() < 1e-12);
    }

    fn evolve_state(h: &HermitianMatrix, u: &ProjectiveState, t1: f64, t0: f64) -> ProjectiveState {
        Propagator::new(h).at(t1, t0).apply_state(u).unwrap()
    }

    #[test]
    fn qubit_quarter_turn_matches_frozen_generator() {
        // |0> to |+> with H = 0: delta = pi/4 and
        // K = (pi sqrt(2)/4)(|+><0| - |0><+|) = (pi/4) [[0,-1],[1,0]].
        let h = zero_h(2);
        let e0 = ProjectiveState::basis(2, 0);
        let plan =
            synthesize_steering(&e0, &h, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, &plus()).unwrap();
        assert!((plan.delta() - FRAC_PI_4).abs() < 1e-12);
        assert!((plan.cost() - FRAC_PI_4).abs() < 1e-12);
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[
                c(0.0, 0.0),
                c(-FRAC_PI_4, 0.0),
                c(FRAC_PI_4, 0.0),
                c(0.0, 0.0),
            ],
        );
        let err = (plan.rotation() - expected).map(|z| z.norm()).max();
        assert!(err < 1e-12, "generator off by {err:.3e}");

        // e^K |0> = |+>, checked against the series oracle.
        let r = crate::testutil::exp_series(plan.rotation());
        let rotated = ProjectiveState::from_vector(&r * e0.amplitudes().clone()).unwrap();
        assert!(fs_distance(&rotated, &plus()).unwrap() < 1e-12);
        assert!(plan.closed_form_residual() < 1e-12);
    }

    #[test]
    fn small_angle_plans_stay_near_free_evolution() {
        let mut rng = sampling::rng_from_seed(4);
        let h = HermitianMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(PI, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-PI, 0.0)],
        ))
        .unwrap();
        let u = plus();
        let flow = Propagator::new(&h);
        for _ in 0..10 {
            let w = flow.at(2.0 / 3.0, 1.0 / 3.0).apply_state(&u).unwrap();
            let v = sampling::state_at_distance(&w, 0.01, &mut rng);
            let plan = synthesize_steering(&u, &h, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, &v).unwrap();
            let gap = operator_norm(
                &(plan.closed_form_v().entries() - flow.at(2.0 / 3.0, 1.0 / 3.0).entries()),
            );
            assert!(gap <= 0.01 + 1e-9, "gap {gap} exceeds delta bound");
            assert!(plan.closed_form_residual() < 1e-9);
        }
    }

    #[test]
    fn near_orthogonal_targets_are_rejected() {
        let h = zero_h(2);
        let e0 = ProjectiveState::basis(2, 0);
        let e1 = ProjectiveState::basis(2, 1);
        assert!(matches!(
            synthesize_steering(&e0, &h, 0.3, 0.4, 0.9, &e1),
            Err(Error::NearOrthogonal { .. })
        ));
    }

    #[test]
    fn invalid_windows_are_rejected() {
        let h = zero_h(2);
        let e0 = ProjectiveState::basis(2, 0);
        for (t0, t, t1) in [(0.0, 0.3, 0.6), (0.5, 0.4, 0.9), (0.3, 0.5, 0.5), (-1.0, 0.2, 0.4)] {
            assert!(matches!(
                synthesize_steering(&e0, &h, t0, t, t1, &e0),
                Err(Error::TimeOrder { .. })
            ));
        }
    }

    #[test]
    fn perturbation_norm_is_constant_across_window() {
        let mut rng = sampling::rng_from_seed(9);
        let h = sampling::random_hermitian(3, 1.5, &mut rng);
        let u = sampling::random_state(3, &mut rng);
        let w = Propagator::new(&h).at(1.7, 0.5).apply_state(&u).unwrap();
        let v = sampling::state_at_distance(&w, 0.2, &mut rng);
        let plan = synthesize_steering(&u, &h, 0.5, 1.1, 1.7, &v).unwrap();
        let (lo, hi) = plan.window();
        let dtau = hi - lo;
        let expected = plan.delta() / dtau;
        for k in 0..10 {
            let t = lo + dtau * k as f64 / 9.0;
            let dh = perturbation_at(&plan, &h, t).unwrap();
            assert!((operator_norm(dh.entries()) - expected).abs() < 1e-10);
        }
        assert!(matches!(
            perturbation_at(&plan, &h, hi + 0.01),
            Err(Error::Window { .. })
        ));
    }

    #[test]
    fn zero_plan_perturbation_vanishes() {
        let h = zero_h(2);
        let e0 = ProjectiveState::basis(2, 0);
        let plan = synthesize_steering(&e0, &h, 0.5, 0.5, 1.0, &e0).unwrap();
        let dh = perturbation_at(&plan, &h, 0.75).unwrap();
        assert!(operator_norm(dh.entries()) < 1e-12);
    }

    #[test]
    fn free_hamiltonian_makes_perturbation_constant() {
        let h = zero_h(2);
        let e0 = ProjectiveState::basis(2, 0);
        let plan =
            synthesize_steering(&e0, &h, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, &plus()).unwrap();
        for t in [1.0 / 3.0, 0.5, 2.0 / 3.0] {
            let dh = perturbation_at(&plan, &h, t).unwrap();
            let gap = (dh.entries() - plan.h_tilde().entries())
                .map(|z| z.norm())
                .max();
            assert!(gap < 1e-12);
        }
    }

    #[test]
    fn integration_verifies_the_quarter_turn() {
        let h = zero_h(2);
        let e0 = ProjectiveState::basis(2, 0);
        let plan =
            synthesize_steering(&e0, &h, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, &plus()).unwrap();
        let report = verify_steering_by_integration(&plan, &h, 1000);
        assert!(report.propagator_error < 1e-6);
        assert!((report.integrated_cost - FRAC_PI_4).abs() < 1e-8);
        assert!(report.target_error < 1e-6);
    }

    #[test]
    fn integration_of_zero_plan_is_exact() {
        let mut rng = sampling::rng_from_seed(14);
        let h = sampling::random_hermitian(2, 1.0, &mut rng);
        let u = sampling::random_state(2, &mut rng);
        let target = evolve_state(&h, &u, 0.9, 0.3);
        let plan = synthesize_steering(&u, &h, 0.3, 0.6, 0.9, &target).unwrap();
        let report = verify_steering_by_integration(&plan, &h, 200);
        assert!(report.target_error < 1e-10);
        assert!(report.propagator_error < 1e-10);
        assert!(report.integrated_cost < 1e-10);
    }

    #[test]
    fn integration_matches_closed_form_on_random_qubit_plans() {
        let mut rng = sampling::rng_from_seed(21);
        for _ in 0..5 {
            let h = sampling::random_hermitian(2, 1.0, &mut rng);
            let u = sampling::random_state(2, &mut rng);
            let w = Propagator::new(&h).at(2.0 / 3.0, 1.0 / 3.0).apply_state(&u).unwrap();
            let v = sampling::state_at_distance(&w, 0.05, &mut rng);
            let plan = synthesize_steering(&u, &h, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, &v).unwrap();
            let report = verify_steering_by_integration(&plan, &h, 1000);
            assert!(report.target_error < 1e-6);
            assert!(report.propagator_error < 1e-6);
            assert!((report.integrated_cost - plan.delta()).abs() < 1e-8);
        }
    }

    #[test]
    fn cost_identity_and_propagator_bound_hold_off_commuting_pairs() {
        let mut rng = sampling::rng_from_seed(33);
        let mut checked_noncommuting = 0;
        for _ in 0..20 {
            let h = sampling::random_hermitian(3, 2.0, &mut rng);
            let u = sampling::random_state(3, &mut rng);
            let w = Propagator::new(&h).at(1.5, 0.4).apply_state(&u).unwrap();
            let delta = 0.25;
            let v = sampling::state_at_distance(&w, delta, &mut rng);
            let plan = synthesize_steering(&u, &h, 0.4, 0.9, 1.5, &v).unwrap();

            assert!((plan.cost() - delta).abs() < 1e-9);
            assert!((operator_norm(plan.rotation()) - delta).abs() < 1e-9);
            let gap = operator_norm(
                &(plan.closed_form_v().entries()
                    - Propagator::new(&h).at(1.5, 0.9).entries()),
            );
            assert!(gap <= delta + 1e-9);

            let commutator = h.entries() * plan.rotation() - plan.rotation() * h.entries();
            if operator_norm(&commutator) > 0.1 {
                checked_noncommuting += 1;
                assert!(plan.closed_form_residual() < 1e-9);
            }
        }
        assert!(checked_noncommuting >= 10, "test lost its non-commuting coverage");
    }

    #[test]
    fn integration_converges_at_fourth_order() {
        let mut rng = sampling::rng_from_seed(40);
        let h = sampling::random_hermitian_with_spectral_radius(2, 6.0, &mut rng);
        let u = sampling::random_state(2, &mut rng);
        let w = Propagator::new(&h).at(2.0 / 3.0, 1.0 / 3.0).apply_state(&u).unwrap();
        let v = sampling::state_at_distance(&w, 0.3, &mut rng);
        let plan = synthesize_steering(&u, &h, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, &v).unwrap();

        let errors: Vec<f64> = [100usize, 200, 400]
            .iter()
            .map(|&n| verify_steering_by_integration(&plan, &h, n).propagator_error)
            .collect();
        for pair in errors.windows(2) {
            if pair[1] < 1e-12 {
                continue; // roundoff floor
            }
            let order = (pair[0] / pair[1]).log2();
            assert!(order >= 3.5, "observed order {order:.2} below 3.5 ({errors:?})");
        }
    }
}
