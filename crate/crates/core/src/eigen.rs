//! Dense complex eigendecompositions for the small matrices used throughout.
//!
//! Hermitian problems go straight to nalgebra's self-adjoint solver. Unitary
//! (normal) matrices are diagonalized by splitting U = C + iS into its
//! commuting Hermitian parts, refining degenerate clusters of C against S,
//! and finishing with exact 2x2 similarity sweeps on any residual coupling.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Off-diagonal magnitude below which a pair is considered decoupled.
const SWEEP_TOL: f64 = 1e-13;
/// Eigenvalues of (U + U†)/2 closer than this are treated as one cluster.
const CLUSTER_TOL: f64 = 1e-6;
const MAX_SWEEPS: usize = 24;

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns real eigenvalues in ascending order and the matching orthonormal
/// eigenbasis as columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let se = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut basis = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        basis.set_column(dst, &se.eigenvectors.column(src));
    }
    (values, basis)
}

/// Diagonalization of a unitary matrix: unit-modulus eigenvalues (sorted by
/// phase) and an orthonormal eigenbasis.
pub fn unitary_eigen(u: &CMatrix) -> (Vec<Complex64>, CMatrix) {
    let n = u.nrows();
    let adj = u.adjoint();
    let real_part = (u + &adj).map(|z| z * 0.5);
    let imag_part = (u - &adj).map(|z| z * Complex64::new(0.0, -0.5));

    let (c_values, mut basis) = hermitian_eigen(&real_part);

    // Within each (near-)degenerate eigenspace of the real part, the imaginary
    // part still distinguishes conjugate phase pairs; diagonalize it there.
    let mut lo = 0;
    while lo < n {
        let mut hi = lo + 1;
        while hi < n && c_values[hi] - c_values[hi - 1] < CLUSTER_TOL {
            hi += 1;
        }
        if hi - lo > 1 {
            let block = basis.columns(lo, hi - lo).into_owned();
            let restricted = block.adjoint() * &imag_part * &block;
            let (_, rot) = hermitian_eigen(&restricted);
            let refined = block * rot;
            for (offset, col) in refined.column_iter().enumerate() {
                basis.set_column(lo + offset, &col);
            }
        }
        lo = hi;
    }

    // Residual coupling (clusters split just above CLUSTER_TOL, or eigenvalues
    // with equal real part resolved imperfectly) is removed by exact 2x2
    // similarity transformations, as in Jacobi iteration for normal matrices.
    let mut d = basis.adjoint() * u * &basis;
    for _ in 0..MAX_SWEEPS {
        let mut max_off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let coupling = d[(i, j)].norm().max(d[(j, i)].norm());
                max_off = max_off.max(coupling);
                if coupling <= SWEEP_TOL {
                    continue;
                }
                let g = two_by_two_eigvec(d[(i, i)], d[(i, j)], d[(j, i)], d[(j, j)]);
                apply_pair_rotation(&mut d, &mut basis, i, j, &g);
            }
        }
        if max_off <= SWEEP_TOL {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let pa = d[(a, a)].arg();
        let pb = d[(b, b)].arg();
        pa.total_cmp(&pb)
    });
    let values: Vec<Complex64> = order.iter().map(|&k| d[(k, k)]).collect();
    let mut sorted = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted.set_column(dst, &basis.column(src));
    }
    (values, sorted)
}

/// Unitary 2x2 similarity diagonalizing a (near-)normal 2x2 block.
fn two_by_two_eigvec(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
) -> [[Complex64; 2]; 2] {
    let tr = a + d;
    let disc = ((a - d) * (a - d) + b * c * 4.0).sqrt();
    let mu = (tr + disc) * 0.5;
    // Eigenvector for mu from whichever row is better conditioned.
    let cand1 = (b, mu - a);
    let cand2 = (mu - d, c);
    let n1 = cand1.0.norm_sqr() + cand1.1.norm_sqr();
    let n2 = cand2.0.norm_sqr() + cand2.1.norm_sqr();
    let (v0, v1) = if n1 >= n2 { cand1 } else { cand2 };
    let norm = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
    if norm < 1e-300 {
        return [
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        ];
    }
    let g00 = v0 / norm;
    let g10 = v1 / norm;
    // Orthogonal complement keeps the transform exactly unitary.
    [[g00, -g10.conj()], [g10, g00.conj()]]
}

fn apply_pair_rotation(
    d: &mut CMatrix,
    basis: &mut CMatrix,
    i: usize,
    j: usize,
    g: &[[Complex64; 2]; 2],
) {
    let n = d.nrows();
    // Right-multiply columns i, j of both D and the accumulated basis.
    for r in 0..n {
        let di = d[(r, i)];
        let dj = d[(r, j)];
        d[(r, i)] = di * g[0][0] + dj * g[1][0];
        d[(r, j)] = di * g[0][1] + dj * g[1][1];
        let bi = basis[(r, i)];
        let bj = basis[(r, j)];
        basis[(r, i)] = bi * g[0][0] + bj * g[1][0];
        basis[(r, j)] = bi * g[0][1] + bj * g[1][1];
    }
    // Left-multiply rows i, j of D by the adjoint.
    for c in 0..n {
        let di = d[(i, c)];
        let dj = d[(j, c)];
        d[(i, c)] = g[0][0].conj() * di + g[1][0].conj() * dj;
        d[(j, c)] = g[0][1].conj() * di + g[1][1].conj() * dj;
    }
}

/// Largest singular value, computed as the square root of the top eigenvalue
/// of M†M. The top eigenvalue of a positive semidefinite matrix is resolved
/// to relative machine precision, so this is accurate at every scale.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.adjoint() * m;
    let se = gram.symmetric_eigen();
    let top = se
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &x| acc.max(x));
    top.max(0.0).sqrt()
}
