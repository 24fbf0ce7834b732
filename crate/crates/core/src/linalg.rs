//! Slice-level dense kernels used by the recurrent cells and heads.
//!
//! All matrices are row-major `rows x cols`. These loops are deliberately
//! plain; at desk scale the optimizer vectorizes them well enough and the
//! evaluation order stays fixed, which keeps runs reproducible.

use crate::tensor::Scalar;

/// `y += W x` for `W: rows x cols`, `x: cols`, `y: rows`.
pub fn matvec_acc<T: Scalar>(w: &[T], rows: usize, cols: usize, x: &[T], y: &mut [T]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(y.len(), rows);
    for r in 0..rows {
        let wr = &w[r * cols..(r + 1) * cols];
        let mut acc = T::zero();
        for (wv, xv) in wr.iter().zip(x.iter()) {
            acc = acc + *wv * *xv;
        }
        y[r] = y[r] + acc;
    }
}

/// `x_grad += W^T dy` for `W: rows x cols`, `dy: rows`, `x_grad: cols`.
pub fn matvec_t_acc<T: Scalar>(w: &[T], rows: usize, cols: usize, dy: &[T], x_grad: &mut [T]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(dy.len(), rows);
    debug_assert_eq!(x_grad.len(), cols);
    for r in 0..rows {
        let wr = &w[r * cols..(r + 1) * cols];
        let d = dy[r];
        if d != T::zero() {
            for (g, wv) in x_grad.iter_mut().zip(wr.iter()) {
                *g = *g + *wv * d;
            }
        }
    }
}

/// `dW += dy (outer) x` for `dW: rows x cols`.
pub fn outer_acc<T: Scalar>(dw: &mut [T], rows: usize, cols: usize, dy: &[T], x: &[T]) {
    debug_assert_eq!(dw.len(), rows * cols);
    debug_assert_eq!(dy.len(), rows);
    debug_assert_eq!(x.len(), cols);
    for r in 0..rows {
        let d = dy[r];
        if d != T::zero() {
            let dwr = &mut dw[r * cols..(r + 1) * cols];
            for (g, xv) in dwr.iter_mut().zip(x.iter()) {
                *g = *g + d * *xv;
            }
        }
    }
}

/// `y += x`.
pub fn add_acc<T: Scalar>(y: &mut [T], x: &[T]) {
    debug_assert_eq!(y.len(), x.len());
    for (a, b) in y.iter_mut().zip(x.iter()) {
        *a = *a + *b;
    }
}

/// Dot product, accumulated in element order.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc = acc + *x * *y;
    }
    acc
}
