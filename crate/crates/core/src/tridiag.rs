//! Thomas algorithm for tridiagonal systems.

use crate::Real;

/// Solves `A x = rhs` in place, where `A` has sub-diagonal `lower`,
/// diagonal `diag` and super-diagonal `upper` (entries `lower[0]` and
/// `upper[n-1]` are ignored). `scratch` must have the same length.
///
/// No pivoting: the ADI systems this serves are strictly diagonally dominant
/// (unit diagonal plus O(dt) perturbations).
pub fn solve_in_place<T: Real>(lower: &[T], diag: &[T], upper: &[T], rhs: &mut [T], scratch: &mut [T]) {
    let n = rhs.len();
    debug_assert!(lower.len() == n && diag.len() == n && upper.len() == n && scratch.len() >= n);
    if n == 0 {
        return;
    }
    scratch[0] = upper[0] / diag[0];
    rhs[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] = rhs[i] - scratch[i] * next;
    }
}
