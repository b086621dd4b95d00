//! Test-only oracles, independent of the eigendecomposition code paths they
//! are used to check.

use crate::eigen::CMatrix;

/// Scaled-Taylor matrix exponential.
pub fn exp_series(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let norm: f64 = m.iter().map(|z| z.norm()).sum();
    let squarings = norm.log2().ceil().max(0.0) as u32 + 1;
    let scaled = m.map(|z| z / 2f64.powi(squarings as i32));
    let mut result = CMatrix::identity(n, n);
    let mut term = CMatrix::identity(n, n);
    for k in 1..30 {
        term = (&term * &scaled).map(|z| z / k as f64);
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}
