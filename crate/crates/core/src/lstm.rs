//! LSTM cell and single-direction sequence runner with backpropagation
//! through time.
//!
//! Gate order is fixed as (input, forget, cell-candidate, output) in all
//! stacked 4h-sized buffers. Each forward call returns the cache needed by
//! its backward pass; nothing is stored globally.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{add_acc, matvec_acc, matvec_t_acc, outer_acc};
use crate::rng::SplitRng;
use crate::tensor::{Scalar, Tensor};

/// Weights of one LSTM cell: `w` maps the input, `u` the previous hidden
/// state, into the stacked gate pre-activations; `b` is the gate bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams<T> {
    pub w: Tensor<T>, // 4h x in
    pub u: Tensor<T>, // 4h x h
    pub b: Tensor<T>, // 4h
}

/// Forward cache for one timestep.
#[derive(Debug, Clone)]
pub struct CellCache<T> {
    x: Vec<T>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    gates: Vec<T>, // post-activation i, f, g, o
    tanh_c: Vec<T>,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl<T: Scalar> LstmCellParams<T> {
    /// Zero-initialized cell for `input -> hidden`.
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmCellParams {
            w: Tensor::zeros(&[4 * hidden, input]),
            u: Tensor::zeros(&[4 * hidden, hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    /// Standard initialization: weights uniform in +-1/sqrt(fan-in), forget
    /// gate bias 1, other biases 0.
    pub fn init(input: usize, hidden: usize, rng: &mut SplitRng) -> Self {
        let mut cell = Self::zeros(input, hidden);
        init_uniform(&mut cell.w, input, rng);
        init_uniform(&mut cell.u, hidden, rng);
        for i in hidden..2 * hidden {
            cell.b.data_mut()[i] = T::one();
        }
        cell
    }

    pub fn hidden(&self) -> usize {
        self.b.len() / 4
    }

    pub fn input(&self) -> usize {
        self.w.cols()
    }

    /// One step of the LSTM recurrence. Returns `(h, c, cache)`.
    pub fn forward(
        &self,
        x: &[T],
        h_prev: &[T],
        c_prev: &[T],
    ) -> Result<(Vec<T>, Vec<T>, CellCache<T>)> {
        let h = self.hidden();
        if x.len() != self.input() {
            return Err(Error::DimMismatch {
                op: "lstm_cell input x",
                expected: self.input(),
                got: x.len(),
            });
        }
        if h_prev.len() != h {
            return Err(Error::DimMismatch {
                op: "lstm_cell h_prev",
                expected: h,
                got: h_prev.len(),
            });
        }
        if c_prev.len() != h {
            return Err(Error::DimMismatch {
                op: "lstm_cell c_prev",
                expected: h,
                got: c_prev.len(),
            });
        }

        let mut pre = self.b.data().to_vec();
        matvec_acc(self.w.data(), 4 * h, self.input(), x, &mut pre);
        matvec_acc(self.u.data(), 4 * h, h, h_prev, &mut pre);

        let mut gates = vec![T::zero(); 4 * h];
        for d in 0..h {
            gates[d] = sigmoid(pre[d]); // input
            gates[h + d] = sigmoid(pre[h + d]); // forget
            gates[2 * h + d] = pre[2 * h + d].tanh(); // candidate
            gates[3 * h + d] = sigmoid(pre[3 * h + d]); // output
        }

        let mut c = vec![T::zero(); h];
        let mut tanh_c = vec![T::zero(); h];
        let mut h_out = vec![T::zero(); h];
        for d in 0..h {
            c[d] = gates[h + d] * c_prev[d] + gates[d] * gates[2 * h + d];
            tanh_c[d] = c[d].tanh();
            h_out[d] = gates[3 * h + d] * tanh_c[d];
        }

        let cache = CellCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            tanh_c,
        };
        Ok((h_out, c, cache))
    }

    /// Backward through one step. `dh`/`dc` are gradients flowing into this
    /// step's outputs; parameter gradients accumulate into `grads`. Returns
    /// `(dx, dh_prev, dc_prev)`.
    pub fn backward(
        &self,
        cache: &CellCache<T>,
        dh: &[T],
        dc: &[T],
        grads: &mut LstmCellParams<T>,
    ) -> (Vec<T>, Vec<T>, Vec<T>) {
        let h = self.hidden();
        let one = T::one();
        let mut d_pre = vec![T::zero(); 4 * h];
        let mut dc_prev = vec![T::zero(); h];

        for d in 0..h {
            let i = cache.gates[d];
            let f = cache.gates[h + d];
            let g = cache.gates[2 * h + d];
            let o = cache.gates[3 * h + d];
            let tc = cache.tanh_c[d];

            let d_o = dh[d] * tc;
            let d_c = dc[d] + dh[d] * o * (one - tc * tc);
            let d_i = d_c * g;
            let d_f = d_c * cache.c_prev[d];
            let d_g = d_c * i;

            d_pre[d] = d_i * i * (one - i);
            d_pre[h + d] = d_f * f * (one - f);
            d_pre[2 * h + d] = d_g * (one - g * g);
            d_pre[3 * h + d] = d_o * o * (one - o);
            dc_prev[d] = d_c * f;
        }

        outer_acc(grads.w.data_mut(), 4 * h, self.input(), &d_pre, &cache.x);
        outer_acc(grads.u.data_mut(), 4 * h, h, &d_pre, &cache.h_prev);
        add_acc(grads.b.data_mut(), &d_pre);

        let mut dx = vec![T::zero(); self.input()];
        matvec_t_acc(self.w.data(), 4 * h, self.input(), &d_pre, &mut dx);
        let mut dh_prev = vec![T::zero(); h];
        matvec_t_acc(self.u.data(), 4 * h, h, &d_pre, &mut dh_prev);

        (dx, dh_prev, dc_prev)
    }
}

pub(crate) fn init_uniform<T: Scalar>(t: &mut Tensor<T>, fan_in: usize, rng: &mut SplitRng) {
    let bound = 1.0 / num_traits::Float::sqrt(fan_in.max(1) as f64);
    for v in t.data_mut() {
        *v = T::from_f64_lossy(rng.range_f64(-bound, bound));
    }
}

/// Caches of one direction's pass over a sequence.
pub struct SequenceRun<T> {
    pub outputs: Vec<Vec<T>>,
    caches: Vec<CellCache<T>>,
}

/// Runs the cell over `xs` from first to last, starting from zero state.
pub fn run_sequence<T: Scalar>(
    cell: &LstmCellParams<T>,
    xs: &[Vec<T>],
) -> Result<SequenceRun<T>> {
    let h = cell.hidden();
    let mut h_prev = vec![T::zero(); h];
    let mut c_prev = vec![T::zero(); h];
    let mut outputs = Vec::with_capacity(xs.len());
    let mut caches = Vec::with_capacity(xs.len());
    for x in xs {
        let (h_t, c_t, cache) = cell.forward(x, &h_prev, &c_prev)?;
        outputs.push(h_t.clone());
        caches.push(cache);
        h_prev = h_t;
        c_prev = c_t;
    }
    Ok(SequenceRun { outputs, caches })
}

/// Backward through a [`run_sequence`] pass. `d_outputs[t]` is the gradient
/// flowing into the step-`t` output. Returns per-step input gradients.
pub fn run_sequence_backward<T: Scalar>(
    cell: &LstmCellParams<T>,
    run: &SequenceRun<T>,
    d_outputs: &[Vec<T>],
    grads: &mut LstmCellParams<T>,
) -> Vec<Vec<T>> {
    let h = cell.hidden();
    let steps = run.caches.len();
    let mut d_inputs = vec![Vec::new(); steps];
    let mut dh_next = vec![T::zero(); h];
    let mut dc_next = vec![T::zero(); h];
    for t in (0..steps).rev() {
        let mut dh = d_outputs[t].clone();
        add_acc(&mut dh, &dh_next);
        let (dx, dh_prev, dc_prev) = cell.backward(&run.caches[t], &dh, &dc_next, grads);
        d_inputs[t] = dx;
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    d_inputs
}
