//! The fixed context (H, A, g) that turns one step of ambient evolution plus
//! a selected collapse into the realized map T.

use crate::collapse::{realize_itinerary, step_realized, ChoiceRule, Observable, OutcomeLabel};
use crate::error::{Error, Result};
use crate::qstate::{HermitianMatrix, HilbertSpace, Propagator, ProjectiveState, UnitaryMatrix};

/// Ambient Hamiltonian, observable and choice rule, with the one-step
/// propagator U = exp(-iH) cached. Immutable after construction; every
/// operation is a pure function of it.
#[derive(Debug, Clone)]
pub struct Dynamics {
    hamiltonian: HermitianMatrix,
    flow: Propagator,
    step_unitary: UnitaryMatrix,
    observable: Observable,
    rule: ChoiceRule,
}

impl Dynamics {
    pub fn new(hamiltonian: HermitianMatrix, observable: Observable, rule: ChoiceRule) -> Result<Self> {
        if hamiltonian.dim() != observable.dim() {
            return Err(Error::Dimension {
                expected: hamiltonian.dim(),
                found: observable.dim(),
            });
        }
        let flow = Propagator::new(&hamiltonian);
        let step_unitary = flow.at(1.0, 0.0);
        Ok(Self {
            hamiltonian,
            flow,
            step_unitary,
            observable,
            rule,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// The underlying Hilbert space.
    pub fn space(&self) -> HilbertSpace {
        HilbertSpace::new(self.dim()).expect("dimension validated at construction")
    }

    pub fn hamiltonian(&self) -> &HermitianMatrix {
        &self.hamiltonian
    }

    pub fn flow(&self) -> &Propagator {
        &self.flow
    }

    /// U(1,0): the propagator of one whole step.
    pub fn step_unitary(&self) -> &UnitaryMatrix {
        &self.step_unitary
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    pub fn rule(&self) -> &ChoiceRule {
        &self.rule
    }

    /// One realized step with its outcome.
    pub fn step(&self, u: &ProjectiveState) -> Result<(ProjectiveState, OutcomeLabel)> {
        step_realized(u, &self.step_unitary, &self.observable, &self.rule)
    }

    /// T(u), discarding the outcome.
    pub fn map(&self, u: &ProjectiveState) -> Result<ProjectiveState> {
        Ok(self.step(u)?.0)
    }

    /// The itinerary and state trace of `steps` realized steps.
    pub fn orbit(
        &self,
        u: &ProjectiveState,
        steps: usize,
    ) -> Result<(Vec<OutcomeLabel>, Vec<ProjectiveState>)> {
        realize_itinerary(u, &self.step_unitary, &self.observable, &self.rule, steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Everything in the public API is immutable after construction, so the
    /// whole surface is shareable across threads.
    #[test]
    fn api_types_are_send_and_sync() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Dynamics>();
        assert_send_sync::<crate::HilbertSpace>();
        assert_send_sync::<crate::ProjectiveState>();
        assert_send_sync::<crate::HermitianMatrix>();
        assert_send_sync::<crate::UnitaryMatrix>();
        assert_send_sync::<crate::Observable>();
        assert_send_sync::<crate::ChoiceRule>();
        assert_send_sync::<crate::SteeringPlan>();
        assert_send_sync::<crate::StateNet>();
        assert_send_sync::<crate::StrongChain>();
        assert_send_sync::<crate::SteeredRun>();
        assert_send_sync::<crate::StageSequence>();
        assert_send_sync::<crate::RecurrenceCertificate>();
        assert_send_sync::<crate::TransitiveSetApprox>();
    }
}
