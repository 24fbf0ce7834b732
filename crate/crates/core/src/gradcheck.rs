//! Central-difference gradient oracle.
//!
//! This module never calls a backward pass: it only evaluates a scalar loss
//! at perturbed parameter vectors. Its output is compared against analytic
//! gradients in tests, which keeps the check independent of the code it
//! verifies. Meant to run at `f64`; single precision drowns the differences
//! in rounding noise.

use alloc::vec::Vec;

use crate::tensor::Scalar;

/// Relative error `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn rel_error<T: Scalar>(a: T, b: T) -> T {
    let denom = a.abs().max(b.abs()).max(T::from_f64_lossy(1e-8));
    (a - b).abs() / denom
}

/// Central differences `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)` per
/// coordinate.
pub fn central_diff_grad<T: Scalar, F: FnMut(&[T]) -> T>(
    mut f: F,
    x: &[T],
    eps: T,
) -> Vec<T> {
    let mut point = x.to_vec();
    let two_eps = eps + eps;
    (0..x.len())
        .map(|i| {
            let orig = point[i];
            point[i] = orig + eps;
            let plus = f(&point);
            point[i] = orig - eps;
            let minus = f(&point);
            point[i] = orig;
            (plus - minus) / two_eps
        })
        .collect()
}

/// Max relative error between an analytic gradient and the central-difference
/// oracle of `f` at `x`.
pub fn grad_check<T: Scalar, F: FnMut(&[T]) -> T>(
    f: F,
    x: &[T],
    analytic: &[T],
    eps: T,
) -> T {
    debug_assert_eq!(x.len(), analytic.len());
    let numeric = central_diff_grad(f, x, eps);
    numeric
        .iter()
        .zip(analytic.iter())
        .fold(T::zero(), |worst, (&n, &a)| worst.max(rel_error(n, a)))
}
