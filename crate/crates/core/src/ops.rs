//! Pooling, dropout and the cross-entropy loss, each with its backward pass.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::SplitRng;
use crate::tensor::Scalar;

/// Componentwise maximum over the unmasked rows of `h` (time x dim).
///
/// Returns the pooled vector and, per component, the row index that supplied
/// it (first occurrence on ties); the backward pass routes each component's
/// gradient to that row.
pub fn maxpool_time<T: Scalar>(h: &[Vec<T>], mask: &[bool]) -> Result<(Vec<T>, Vec<usize>)> {
    if h.len() != mask.len() {
        return Err(Error::DimMismatch {
            op: "maxpool_time mask",
            expected: h.len(),
            got: mask.len(),
        });
    }
    let mut out: Option<(Vec<T>, Vec<usize>)> = None;
    for (t, row) in h.iter().enumerate() {
        if !mask[t] {
            continue;
        }
        match &mut out {
            None => out = Some((row.clone(), vec![t; row.len()])),
            Some((best, arg)) => {
                if best.len() != row.len() {
                    return Err(Error::DimMismatch {
                        op: "maxpool_time row",
                        expected: best.len(),
                        got: row.len(),
                    });
                }
                for (d, &v) in row.iter().enumerate() {
                    if v > best[d] {
                        best[d] = v;
                        arg[d] = t;
                    }
                }
            }
        }
    }
    out.ok_or(Error::EmptySequence)
}

/// Routes the pooled gradient back to the argmax rows.
pub fn maxpool_backward<T: Scalar>(
    d_pooled: &[T],
    argmax: &[usize],
    d_h: &mut [Vec<T>],
) {
    for (d, &t) in argmax.iter().enumerate() {
        d_h[t][d] = d_h[t][d] + d_pooled[d];
    }
}

/// Inverted dropout: zeroes with probability `p` and scales survivors by
/// `1/(1-p)`, so the expectation equals the input. `p = 0` is the identity
/// and consumes no randomness. Returns the keep mask for the backward pass.
pub fn dropout_forward<T: Scalar>(x: &mut [T], p: f64, rng: &mut SplitRng) -> Vec<bool> {
    if p <= 0.0 {
        return vec![true; x.len()];
    }
    let scale = T::from_f64_lossy(1.0 / (1.0 - p));
    let mut keep = vec![true; x.len()];
    for (i, v) in x.iter_mut().enumerate() {
        if rng.bernoulli(p) {
            keep[i] = false;
            *v = T::zero();
        } else {
            *v = *v * scale;
        }
    }
    keep
}

/// Backward of [`dropout_forward`] with the same mask and rate.
pub fn dropout_backward<T: Scalar>(dx: &mut [T], keep: &[bool], p: f64) {
    if p <= 0.0 {
        return;
    }
    let scale = T::from_f64_lossy(1.0 / (1.0 - p));
    for (g, &k) in dx.iter_mut().zip(keep.iter()) {
        *g = if k { *g * scale } else { T::zero() };
    }
}

/// Mean softmax cross-entropy over rows, with `ignore_id` rows skipped.
///
/// Log-softmax is stabilized by max subtraction. Returns the mean loss over
/// non-ignored rows and the gradient w.r.t. every logit (zero on ignored
/// rows). Errors if every row is ignored or a target is out of range.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &[Vec<T>],
    targets: &[u32],
    ignore_id: u32,
) -> Result<(T, Vec<Vec<T>>)> {
    if logits.len() != targets.len() {
        return Err(Error::DimMismatch {
            op: "softmax_cross_entropy targets",
            expected: logits.len(),
            got: targets.len(),
        });
    }
    let scored = targets.iter().filter(|&&t| t != ignore_id).count();
    if scored == 0 {
        return Err(Error::NoScoredRows);
    }
    let inv_n = T::one() / T::from_f64_lossy(scored as f64);

    let mut total = T::zero();
    let mut grads = Vec::with_capacity(logits.len());
    for (row, &target) in logits.iter().zip(targets.iter()) {
        if target == ignore_id {
            grads.push(vec![T::zero(); row.len()]);
            continue;
        }
        let t = target as usize;
        if t >= row.len() {
            return Err(Error::IdOutOfRange {
                id: target,
                vocab: row.len(),
            });
        }
        let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut sum = T::zero();
        for &v in row {
            sum = sum + (v - max).exp();
        }
        let log_z = max + sum.ln();
        total = total + (log_z - row[t]);

        let mut g: Vec<T> = row.iter().map(|&v| ((v - max).exp() / sum) * inv_n).collect();
        g[t] = g[t] - inv_n;
        grads.push(g);
    }
    Ok((total * inv_n, grads))
}
