//! Seeded sampling of states and operators. Everything routes through a
//! caller-provided RNG so whole experiments replay bit-identically.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::eigen::{CMatrix, CVector};
use crate::qstate::{HermitianMatrix, ProjectiveState, UnitaryMatrix};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn ginibre(dim: usize, rng: &mut impl Rng) -> CMatrix {
    DMatrix::from_fn(dim, dim, |_, _| Complex64::new(gaussian(rng), gaussian(rng)))
}

/// Complex-Gaussian unit vector: Fubini-Study uniform on projective space.
pub fn random_state(dim: usize, rng: &mut impl Rng) -> ProjectiveState {
    loop {
        let v = CVector::from_fn(dim, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
        if let Ok(state) = ProjectiveState::from_vector(v) {
            return state;
        }
    }
}

/// GUE-style Hermitian matrix, entries scaled by `scale`.
pub fn random_hermitian(dim: usize, scale: f64, rng: &mut impl Rng) -> HermitianMatrix {
    let g = ginibre(dim, rng);
    let adj = g.adjoint();
    HermitianMatrix::new((g + adj).map(|z| z * (0.5 * scale))).expect("symmetrized by construction")
}

/// Hermitian matrix rescaled so its spectral radius is exactly `radius`.
pub fn random_hermitian_with_spectral_radius(
    dim: usize,
    radius: f64,
    rng: &mut impl Rng,
) -> HermitianMatrix {
    let h = random_hermitian(dim, 1.0, rng);
    let norm = crate::qstate::operator_norm(h.entries());
    if norm < 1e-12 {
        return HermitianMatrix::zeros(dim);
    }
    HermitianMatrix::new(h.entries().map(|z| z * (radius / norm))).expect("rescaled Hermitian")
}

/// Haar-distributed unitary via QR of a Ginibre matrix with the phase fix
/// q_j -> q_j * r_jj/|r_jj|.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> UnitaryMatrix {
    let qr = ginibre(dim, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..dim {
                q[(i, j)] *= phase;
            }
        }
    }
    UnitaryMatrix::new(q).expect("QR factor is unitary")
}

/// A state at exact Fubini-Study distance `delta` from `base`, in a random
/// tangent direction.
pub fn state_at_distance(
    base: &ProjectiveState,
    delta: f64,
    rng: &mut impl Rng,
) -> ProjectiveState {
    assert!((0.0..std::f64::consts::FRAC_PI_2).contains(&delta));
    let dim = base.dim();
    loop {
        let g = CVector::from_fn(dim, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
        let overlap = base.amplitudes().dotc(&g);
        let tangent = g - base.amplitudes().map(|z| z * overlap);
        let norm = tangent.norm();
        if norm < 1e-8 {
            continue;
        }
        let unit_tangent = tangent.map(|z| z / norm);
        let v = base.amplitudes().map(|z| z * delta.cos())
            + unit_tangent.map(|z| z * delta.sin());
        return ProjectiveState::from_vector(v).expect("unit by construction");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::fs_distance;

    #[test]
    fn seeded_sampling_replays() {
        let a = random_state(4, &mut rng_from_seed(42));
        let b = random_state(4, &mut rng_from_seed(42));
        assert_eq!(a, b);
    }

    #[test]
    fn state_at_distance_hits_requested_angle() {
        let mut rng = rng_from_seed(7);
        let base = random_state(3, &mut rng);
        for &delta in &[0.0, 0.01, 0.3, 1.2] {
            let v = state_at_distance(&base, delta, &mut rng);
            assert!((fs_distance(&base, &v).unwrap() - delta).abs() < 1e-12);
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = rng_from_seed(9);
        let u = random_unitary(5, &mut rng);
        assert_eq!(u.dim(), 5);
    }
}
