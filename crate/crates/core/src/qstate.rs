//! States, Hermitian and unitary operators on a fixed finite-dimensional
//! Hilbert space, and the Fubini-Study geometry of its projective space.
//!
//! All matrix functions go through eigendecompositions rather than series:
//! dimensions are desk-scale and exactness matters more than speed.

use num_complex::Complex64;

use crate::eigen::{self, CMatrix, CVector};
use crate::error::{Error, Result};
use crate::tol;

/// A finite-dimensional Hilbert space C^dim; its projective space is CP^{dim-1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertSpace {
    dim: usize,
}

impl HilbertSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidInput(format!(
                "Hilbert space dimension must be at least 2, got {dim}"
            )));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// A point of projective space, stored as a canonical unit vector.
///
/// Canonical form: the first component of largest modulus is real and
/// non-negative. Equal rays therefore compare bitwise equal, which the
/// deterministic choice rules and the replay checks rely on.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveState {
    amplitudes: CVector,
}

impl ProjectiveState {
    /// Wraps an already-normalized amplitude vector (norm within 1e-12 of 1).
    pub fn new(amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "state needs dimension >= 2, got {}",
                amplitudes.len()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > tol::UNIT_NORM {
            return Err(Error::Normalization {
                norm,
                tolerance: tol::UNIT_NORM,
            });
        }
        let mut state = Self { amplitudes };
        state.canonicalize();
        Ok(state)
    }

    /// Normalizes an arbitrary nonzero vector and canonicalizes it.
    pub fn from_vector(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm <= tol::ZERO_WEIGHT_NORM {
            return Err(Error::ZeroVector { norm });
        }
        // Normalization happens inside canonicalize, which skips it when the
        // norm is already within rounding of 1 — re-wrapping a unit vector
        // must not move any bits.
        let mut state = Self { amplitudes };
        state.canonicalize();
        Ok(state)
    }

    /// The computational basis state |k>.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(dim >= 2, "state needs dimension >= 2, got {dim}");
        assert!(k < dim, "basis index {k} out of range for dimension {dim}");
        let mut v = CVector::zeros(dim);
        v[k] = Complex64::new(1.0, 0.0);
        Self { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// <self|other>.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_dim(other)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// Restores canonical form in place. Idempotent at the bit level: a state
    /// already in canonical form is left untouched, so repeated trips through
    /// constructors never drift.
    fn canonicalize(&mut self) {
        let n2 = self.amplitudes.norm_squared();
        if (n2 - 1.0).abs() > 4.0 * f64::EPSILON {
            let inv = 1.0 / n2.sqrt();
            for z in self.amplitudes.iter_mut() {
                *z *= inv;
            }
        }
        let mut pivot = 0;
        let mut best = 0.0f64;
        for (k, z) in self.amplitudes.iter().enumerate() {
            let m = z.norm_sqr();
            if m > best {
                best = m;
                pivot = k;
            }
        }
        let p = self.amplitudes[pivot];
        if p.im == 0.0 && p.re >= 0.0 {
            return;
        }
        let phase = p / p.norm();
        let rot = phase.conj();
        for z in self.amplitudes.iter_mut() {
            *z *= rot;
        }
        // The pivot is now real up to rounding; make that exact so a second
        // canonicalization pass is a no-op.
        let fixed = self.amplitudes[pivot].re.abs();
        self.amplitudes[pivot] = Complex64::new(fixed, 0.0);
    }
}

/// A validated Hermitian matrix (M = M† within 1e-12).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    entries: CMatrix,
}

impl HermitianMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Dimension {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        let residual = (&entries - entries.adjoint()).map(|z| z.norm()).max();
        if residual > tol::HERMITICITY {
            return Err(Error::Hermiticity {
                residual,
                tolerance: tol::HERMITICITY,
            });
        }
        Ok(Self { entries })
    }

    /// Zero operator.
    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: CMatrix::zeros(dim, dim),
        }
    }

    /// For internally computed products that are Hermitian up to rounding:
    /// scrubs the residual instead of failing on it.
    pub(crate) fn symmetrized(entries: CMatrix) -> Self {
        let adj = entries.adjoint();
        Self {
            entries: (entries + adj).map(|z| z * 0.5),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }
}

/// A validated unitary matrix (U†U = I within 1e-10).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    entries: CMatrix,
}

impl UnitaryMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Dimension {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        let n = entries.nrows();
        let residual = (entries.adjoint() * &entries - CMatrix::identity(n, n))
            .map(|z| z.norm())
            .max();
        if residual > tol::UNITARITY {
            return Err(Error::Unitarity {
                residual,
                tolerance: tol::UNITARITY,
            });
        }
        Ok(Self { entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: CMatrix::identity(dim, dim),
        }
    }

    /// Skips the O(n^3) validation for matrices produced by our own
    /// unitary-by-construction routes.
    pub(crate) fn new_unchecked(entries: CMatrix) -> Self {
        debug_assert!(
            {
                let n = entries.nrows();
                (entries.adjoint() * &entries - CMatrix::identity(n, n))
                    .map(|z| z.norm())
                    .max()
                    < 1e-9
            },
            "internal product lost unitarity"
        );
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        Self {
            entries: self.entries.adjoint(),
        }
    }

    /// U v for a raw vector.
    pub fn apply_vector(&self, v: &CVector) -> CVector {
        &self.entries * v
    }

    /// [U u] as a canonical projective state.
    pub fn apply_state(&self, u: &ProjectiveState) -> Result<ProjectiveState> {
        if self.dim() != u.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: u.dim(),
            });
        }
        ProjectiveState::from_vector(&self.entries * u.amplitudes())
    }

    /// Matrix product self * rhs.
    pub fn compose(&self, rhs: &UnitaryMatrix) -> UnitaryMatrix {
        Self::new_unchecked(&self.entries * &rhs.entries)
    }
}

/// Fubini-Study distance arccos|<a,b>| in [0, pi/2].
///
/// Near zero the arccosine of an inner product cannot resolve below ~1e-8 in
/// f64, so small separations are computed from the orthogonal residual
/// (an arcsine form), which stays accurate down to machine precision. Bitwise
/// equal canonical states return exactly 0.
pub fn fs_distance(a: &ProjectiveState, b: &ProjectiveState) -> Result<f64> {
    a.check_dim(b)?;
    if a.amplitudes == b.amplitudes {
        return Ok(0.0);
    }
    Ok(fs_angle_unit_vectors(&a.amplitudes, &b.amplitudes))
}

/// The same angle for raw unit vectors (no canonicalization assumed).
pub(crate) fn fs_angle_unit_vectors(a: &CVector, b: &CVector) -> f64 {
    let overlap = a.dotc(b);
    let c = overlap.norm().min(1.0);
    if c < 0.99 {
        return c.acos();
    }
    let residual = b - a.map(|z| z * overlap);
    let s = residual.norm().min(1.0);
    s.asin()
}

/// Cached eigendecomposition of a Hamiltonian, for cheap propagators at many
/// times. `at(t1, t0)` is exp(-iH(t1-t0)).
#[derive(Debug, Clone)]
pub struct Propagator {
    eigenvalues: Vec<f64>,
    basis: CMatrix,
    dim: usize,
}

impl Propagator {
    pub fn new(h: &HermitianMatrix) -> Self {
        let (eigenvalues, basis) = eigen::hermitian_eigen(h.entries());
        Self {
            eigenvalues,
            basis,
            dim: h.dim(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, t1: f64, t0: f64) -> UnitaryMatrix {
        let dt = t1 - t0;
        let phases = CVector::from_iterator(
            self.dim,
            self.eigenvalues
                .iter()
                .map(|&lambda| Complex64::from_polar(1.0, -lambda * dt)),
        );
        let diag = CMatrix::from_diagonal(&phases);
        UnitaryMatrix::new_unchecked(&self.basis * diag * self.basis.adjoint())
    }
}

/// exp(-iH(t1-t0)) through the Hermitian eigendecomposition of H.
///
/// Reversed times (t1 < t0) yield the inverse propagator U(t0,t1)†, which
/// the steering verifier uses to pull achieved states back in time.
pub fn evolve(h: &HermitianMatrix, t1: f64, t0: f64) -> UnitaryMatrix {
    Propagator::new(h).at(t1, t0)
}

/// exp(K) for a skew-Hermitian K, via the Hermitian eigendecomposition of iK.
pub fn skew_exp(k: &CMatrix) -> Result<UnitaryMatrix> {
    let residual = (k + k.adjoint()).map(|z| z.norm()).max();
    if residual > tol::UNITARITY {
        return Err(Error::InvalidInput(format!(
            "skew_exp needs a skew-Hermitian argument (residual {residual:.3e})"
        )));
    }
    let a = HermitianMatrix::symmetrized(k.map(|z| z * Complex64::new(0.0, 1.0)));
    // K = -iA with A Hermitian, so e^K = e^{-iA}.
    Ok(evolve(&a, 1.0, 0.0))
}

/// Principal logarithm of a unitary: the Hermitian G with e^{-iG} = U and
/// eigenphases in (-pi, pi].
///
/// Eigenvalues of U within `tol::BRANCH_MARGIN` of the branch point -1 are
/// rejected as `BranchAmbiguity`; the documented remedy is a small
/// perturbation of the caller's window.
pub fn unitary_log(u: &UnitaryMatrix) -> Result<HermitianMatrix> {
    let (values, basis) = eigen::unitary_eigen(u.entries());
    let mut phases = Vec::with_capacity(values.len());
    for v in &values {
        let phi = v.arg();
        // e^{-ig} = e^{i phi}  =>  g = -phi, principal branch.
        if std::f64::consts::PI - phi.abs() < tol::BRANCH_MARGIN {
            return Err(Error::BranchAmbiguity {
                phase: -phi,
                margin: tol::BRANCH_MARGIN,
            });
        }
        phases.push(-phi);
    }
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(
        phases.len(),
        phases.iter().map(|&g| Complex64::new(g, 0.0)),
    ));
    Ok(HermitianMatrix::symmetrized(
        &basis * diag * basis.adjoint(),
    ))
}

/// Operator norm (largest singular value) of any square complex matrix.
pub fn operator_norm(m: &CMatrix) -> f64 {
    assert_eq!(m.nrows(), m.ncols(), "operator_norm expects a square matrix");
    eigen::spectral_norm(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn plus() -> ProjectiveState {
        ProjectiveState::from_vector(CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)])).unwrap()
    }

    fn mat_err(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).map(|z| z.norm()).max()
    }

    #[test]
    fn fs_distance_basis_cases() {
        let e0 = ProjectiveState::basis(2, 0);
        let e1 = ProjectiveState::basis(2, 1);
        assert_eq!(fs_distance(&e0, &e0).unwrap(), 0.0);
        assert!((fs_distance(&e0, &e1).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((fs_distance(&e0, &plus()).unwrap() - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn fs_distance_rejects_dimension_mismatch() {
        let e0 = ProjectiveState::basis(2, 0);
        let f0 = ProjectiveState::basis(3, 0);
        assert!(matches!(
            fs_distance(&e0, &f0),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn fs_distance_resolves_tiny_angles() {
        let mut rng = sampling::rng_from_seed(5);
        let base = sampling::random_state(4, &mut rng);
        for &delta in &[1e-3, 1e-6, 1e-9, 1e-12] {
            let nearby = sampling::state_at_distance(&base, delta, &mut rng);
            let d = fs_distance(&base, &nearby).unwrap();
            assert!(
                (d - delta).abs() < 1e-13 + 1e-6 * delta,
                "angle {delta:e} measured as {d:e}"
            );
        }
    }

    #[test]
    fn canonical_form_is_phase_invariant_and_idempotent() {
        let raw = CVector::from_vec(vec![c(0.3, -0.4), c(-0.5, 0.2), c(0.1, 0.6)]);
        let a = ProjectiveState::from_vector(raw.clone()).unwrap();
        let rotated = raw.map(|z| z * Complex64::from_polar(1.0, 1.234));
        let b = ProjectiveState::from_vector(rotated).unwrap();
        // Global phase collapses to the same representative up to rounding.
        let gap = (a.amplitudes() - b.amplitudes()).norm();
        assert!(gap < 1e-14, "canonical representatives differ by {gap:e}");
        // Re-wrapping an already canonical state must not move a single bit.
        let again = ProjectiveState::new(a.amplitudes().clone()).unwrap();
        assert_eq!(a, again);
        // And the pipeline is deterministic: same input bits, same output bits.
        assert_eq!(a, ProjectiveState::from_vector(raw).unwrap());
    }

    #[test]
    fn evolve_at_equal_times_is_identity() {
        let h = HermitianMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(-0.3, 0.0)],
        ))
        .unwrap();
        let u = evolve(&h, 2.5, 2.5);
        assert!(mat_err(u.entries(), &CMatrix::identity(2, 2)) < 1e-14);
    }

    #[test]
    fn evolve_diagonal_phases() {
        let h = HermitianMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(PI, 0.0)],
        ))
        .unwrap();
        let u = evolve(&h, 1.0, 0.0);
        let expected =
            CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        assert!(mat_err(u.entries(), &expected) < 1e-13);
    }

    #[test]
    fn evolve_sigma_x_quarter_turn() {
        // exp(-i sigma_x pi/2) = -i sigma_x; checked against the series oracle.
        let h = HermitianMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[
                c(0.0, 0.0),
                c(FRAC_PI_2, 0.0),
                c(FRAC_PI_2, 0.0),
                c(0.0, 0.0),
            ],
        ))
        .unwrap();
        let u = evolve(&h, 1.0, 0.0);
        let expected =
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, -1.0), c(0.0, 0.0)]);
        assert!(mat_err(u.entries(), &expected) < 1e-13);
        let series = crate::testutil::exp_series(
            &h.entries().map(|z| z * Complex64::new(0.0, -1.0)),
        );
        assert!(mat_err(u.entries(), &series) < 1e-12);
    }

    #[test]
    fn hermitian_constructor_rejects_asymmetry() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.2, 0.0), c(0.0, 0.0)]);
        assert!(matches!(
            HermitianMatrix::new(m),
            Err(Error::Hermiticity { .. })
        ));
    }

    #[test]
    fn unitary_log_trivial_cases() {
        let id = UnitaryMatrix::identity(3);
        let g = unitary_log(&id).unwrap();
        assert!(g.entries().map(|z| z.norm()).max() < 1e-12);

        let u = UnitaryMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -1.0)],
        ))
        .unwrap();
        let g = unitary_log(&u).unwrap();
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[
                c(-FRAC_PI_2, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(FRAC_PI_2, 0.0),
            ],
        );
        assert!(mat_err(g.entries(), &expected) < 1e-12);
    }

    #[test]
    fn unitary_log_round_trips_random_unitaries() {
        let mut rng = sampling::rng_from_seed(11);
        for _ in 0..20 {
            let u = sampling::random_unitary(3, &mut rng);
            let g = unitary_log(&u).unwrap();
            let back = evolve(&g, 1.0, 0.0);
            assert!(mat_err(back.entries(), u.entries()) < 1e-9);
        }
    }

    #[test]
    fn unitary_log_flags_branch_cut() {
        let u = UnitaryMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        ))
        .unwrap();
        assert!(matches!(
            unitary_log(&u),
            Err(Error::BranchAmbiguity { .. })
        ));
    }

    #[test]
    fn operator_norm_cases() {
        assert_eq!(operator_norm(&CMatrix::zeros(3, 3)), 0.0);
        assert!((operator_norm(&CMatrix::identity(4, 4)) - 1.0).abs() < 1e-14);
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-4.0, 0.0)],
        );
        assert!((operator_norm(&m) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn skew_exp_matches_series_oracle() {
        let mut rng = sampling::rng_from_seed(3);
        for _ in 0..10 {
            let h = sampling::random_hermitian(3, 0.8, &mut rng);
            let k = h.entries().map(|z| z * Complex64::new(0.0, -1.0));
            let via_eigen = skew_exp(&k).unwrap();
            let via_series = crate::testutil::exp_series(&k);
            assert!(mat_err(via_eigen.entries(), &via_series) < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fs_metric_axioms(seed in 0u64..1u64 << 48) {
            let mut rng = sampling::rng_from_seed(seed);
            let a = sampling::random_state(3, &mut rng);
            let b = sampling::random_state(3, &mut rng);
            let c = sampling::random_state(3, &mut rng);
            let dab = fs_distance(&a, &b).unwrap();
            let dba = fs_distance(&b, &a).unwrap();
            let dac = fs_distance(&a, &c).unwrap();
            let dcb = fs_distance(&c, &b).unwrap();
            prop_assert!((0.0..=FRAC_PI_2 + 1e-12).contains(&dab));
            prop_assert!((dab - dba).abs() < 1e-9);
            prop_assert!(dab <= dac + dcb + 1e-9);
            prop_assert!(fs_distance(&a, &a).unwrap() < 1e-12);
        }

        #[test]
        fn fs_distance_is_unitarily_invariant(seed in 0u64..1u64 << 48) {
            let mut rng = sampling::rng_from_seed(seed);
            let a = sampling::random_state(3, &mut rng);
            let b = sampling::random_state(3, &mut rng);
            let u = sampling::random_unitary(3, &mut rng);
            let ua = u.apply_state(&a).unwrap();
            let ub = u.apply_state(&b).unwrap();
            let before = fs_distance(&a, &b).unwrap();
            let after = fs_distance(&ua, &ub).unwrap();
            prop_assert!((before - after).abs() < 1e-9);
        }

        #[test]
        fn evolve_group_law_and_unitarity(seed in 0u64..1u64 << 48, t0 in -1.0f64..1.0, dt1 in 0.0f64..2.0, dt2 in 0.0f64..2.0) {
            let mut rng = sampling::rng_from_seed(seed);
            let h = sampling::random_hermitian(3, 1.0, &mut rng);
            let t1 = t0 + dt1;
            let t2 = t1 + dt2;
            let u10 = evolve(&h, t1, t0);
            let u21 = evolve(&h, t2, t1);
            let u20 = evolve(&h, t2, t0);
            let composed = u21.compose(&u10);
            let err = (composed.entries() - u20.entries()).map(|z| z.norm()).max();
            prop_assert!(err < 1e-10);
            prop_assert!(UnitaryMatrix::new(u20.entries().clone()).is_ok());
        }

        #[test]
        fn unitary_log_inverts_exponential(seed in 0u64..1u64 << 48) {
            // G with spectrum comfortably inside (-pi, pi).
            let mut rng = sampling::rng_from_seed(seed);
            let g = sampling::random_hermitian_with_spectral_radius(3, PI - 0.01, &mut rng);
            let u = evolve(&g, 1.0, 0.0);
            let recovered = unitary_log(&u).unwrap();
            let err = (recovered.entries() - g.entries()).map(|z| z.norm()).max();
            prop_assert!(err < 1e-9);
        }
    }
}
