//! Classifier heads over frozen sentence embeddings.
//!
//! Heads never see model parameters, only embedding vectors, so training a
//! head cannot touch the encoder. Pair classification uses the feature map
//! `[p; h; p*h; |p-h|]`; hidden layers are tanh, the output layer is linear
//! into a softmax.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::linalg::{add_acc, matvec_acc, matvec_t_acc, outer_acc};
use crate::lstm::init_uniform;
use crate::ops::softmax_cross_entropy;
use crate::rng::SplitRng;
use crate::tensor::{Scalar, Tensor};

/// Feature vector for a (premise, hypothesis) embedding pair:
/// `[p; h; p*h; |p-h|]`, dimension `4 * d`.
pub fn pair_features<T: Scalar>(p: &[T], h: &[T]) -> Result<Vec<T>> {
    if p.len() != h.len() {
        return Err(Error::DimMismatch {
            op: "pair_features",
            expected: p.len(),
            got: h.len(),
        });
    }
    let mut out = Vec::with_capacity(4 * p.len());
    out.extend_from_slice(p);
    out.extend_from_slice(h);
    for (a, b) in p.iter().zip(h.iter()) {
        out.push(*a * *b);
    }
    for (a, b) in p.iter().zip(h.iter()) {
        out.push((*a - *b).abs());
    }
    Ok(out)
}

/// Backward of [`pair_features`]: splits a feature gradient into gradients
/// for the two embeddings. The absolute-difference block uses the sign
/// subgradient (zero at equality).
pub fn pair_features_backward<T: Scalar>(
    p: &[T],
    h: &[T],
    d_feat: &[T],
) -> (Vec<T>, Vec<T>) {
    let d = p.len();
    debug_assert_eq!(d_feat.len(), 4 * d);
    let mut dp = d_feat[..d].to_vec();
    let mut dh = d_feat[d..2 * d].to_vec();
    for i in 0..d {
        let g_prod = d_feat[2 * d + i];
        dp[i] = dp[i] + g_prod * h[i];
        dh[i] = dh[i] + g_prod * p[i];
        let g_abs = d_feat[3 * d + i];
        let diff = p[i] - h[i];
        let sign = if diff > T::zero() {
            T::one()
        } else if diff < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        dp[i] = dp[i] + g_abs * sign;
        dh[i] = dh[i] - g_abs * sign;
    }
    (dp, dh)
}

/// Feed-forward classifier: tanh hidden layers, linear output into softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpHead<T> {
    /// `(weight out x in, bias out)` per layer, output layer last.
    layers: Vec<(Tensor<T>, Tensor<T>)>,
    sizes: Vec<usize>,
}

/// Caches of one forward pass (the input to each layer).
pub struct MlpCache<T> {
    inputs: Vec<Vec<T>>,
}

impl<T: Scalar> MlpHead<T> {
    /// `sizes` is `[input, hidden..., classes]`.
    pub fn init(sizes: &[usize], rng: &mut SplitRng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Invalid(
                "head needs at least input and output sizes".to_string(),
            ));
        }
        let mut layers = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let mut weight = Tensor::zeros(&[fan_out, fan_in]);
            init_uniform(&mut weight, fan_in, rng);
            layers.push((weight, Tensor::zeros(&[fan_out])));
        }
        Ok(MlpHead {
            layers,
            sizes: sizes.to_vec(),
        })
    }

    pub fn from_tensors(sizes: Vec<usize>, layers: Vec<(Tensor<T>, Tensor<T>)>) -> Result<Self> {
        if sizes.len() < 2 || layers.len() != sizes.len() - 1 {
            return Err(Error::Invalid("inconsistent head tensors".to_string()));
        }
        for (i, (w, b)) in layers.iter().enumerate() {
            if w.shape() != [sizes[i + 1], sizes[i]] || b.shape() != [sizes[i + 1]] {
                return Err(Error::Invalid(alloc::format!(
                    "head layer {i} has unexpected shape"
                )));
            }
        }
        Ok(MlpHead { layers, sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn layers(&self) -> &[(Tensor<T>, Tensor<T>)] {
        &self.layers
    }

    /// Logits for one feature vector.
    pub fn forward(&self, x: &[T]) -> Result<(Vec<T>, MlpCache<T>)> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                op: "mlp forward",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut act = x.to_vec();
        for (li, (w, b)) in self.layers.iter().enumerate() {
            inputs.push(act.clone());
            let mut next = b.data().to_vec();
            matvec_acc(w.data(), w.rows(), w.cols(), &act, &mut next);
            if li + 1 < self.layers.len() {
                for v in &mut next {
                    *v = v.tanh();
                }
            }
            act = next;
        }
        Ok((act, MlpCache { inputs }))
    }

    /// Backward from a logit gradient; accumulates into `grads` and returns
    /// the gradient w.r.t. the input features.
    pub fn backward(&self, cache: &MlpCache<T>, d_logits: &[T], grads: &mut MlpHead<T>) -> Vec<T> {
        let mut d_act = d_logits.to_vec();
        for li in (0..self.layers.len()).rev() {
            let (w, _) = &self.layers[li];
            let input = &cache.inputs[li];
            // output layer is linear; hidden activations need tanh'
            if li + 1 < self.layers.len() {
                // recompute the tanh outputs of this layer from the next input
                let act_out = &cache.inputs[li + 1];
                for (g, &a) in d_act.iter_mut().zip(act_out.iter()) {
                    *g = *g * (T::one() - a * a);
                }
            }
            let (gw, gb) = &mut grads.layers[li];
            outer_acc(gw.data_mut(), w.rows(), w.cols(), &d_act, input);
            add_acc(gb.data_mut(), &d_act);
            let mut d_in = vec![T::zero(); w.cols()];
            matvec_t_acc(w.data(), w.rows(), w.cols(), &d_act, &mut d_in);
            d_act = d_in;
        }
        d_act
    }

    pub fn zeros_like(&self) -> MlpHead<T> {
        MlpHead {
            layers: self
                .layers
                .iter()
                .map(|(w, b)| (w.zeros_like(), b.zeros_like()))
                .collect(),
            sizes: self.sizes.clone(),
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .flat_map(|(w, b)| [&mut *w, &mut *b])
            .collect()
    }

    pub fn predict(&self, x: &[T]) -> Result<usize> {
        let (logits, _) = self.forward(x)?;
        let mut best = 0usize;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        Ok(best)
    }

    /// Accuracy over a labeled feature set; order of examples is irrelevant.
    pub fn accuracy(&self, features: &[Vec<T>], labels: &[u32]) -> Result<f64> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(Error::Invalid("empty or mismatched eval set".to_string()));
        }
        let mut hits = 0usize;
        for (x, &y) in features.iter().zip(labels.iter()) {
            if self.predict(x)? as u32 == y {
                hits += 1;
            }
        }
        Ok(hits as f64 / features.len() as f64)
    }
}

/// Head training hyperparameters; embeddings/features are fixed inputs and
/// are never updated.
#[derive(Debug, Clone)]
pub struct HeadTrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for HeadTrainConfig {
    fn default() -> Self {
        HeadTrainConfig {
            lr: 0.001,
            epochs: 50,
            batch_size: 32,
            seed: 1,
        }
    }
}

/// Trains an MLP head with Adam on fixed feature vectors.
///
/// `layer_sizes` lists the hidden sizes only; input and class count come
/// from the data. Every class must appear at least once. Deterministic for a
/// fixed seed.
pub fn train_head<T: Scalar>(
    features: &[Vec<T>],
    labels: &[u32],
    hidden_sizes: &[usize],
    classes: usize,
    cfg: &HeadTrainConfig,
) -> Result<MlpHead<T>> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::Invalid(
            "features and labels must be non-empty and aligned".to_string(),
        ));
    }
    if classes < 2 {
        return Err(Error::Invalid("need at least two classes".to_string()));
    }
    for c in 0..classes {
        if !labels.iter().any(|&l| l as usize == c) {
            return Err(Error::MissingClass { class: c });
        }
    }
    for &l in labels {
        if l as usize >= classes {
            return Err(Error::IdOutOfRange {
                id: l,
                vocab: classes,
            });
        }
    }

    let mut sizes = vec![features[0].len()];
    sizes.extend_from_slice(hidden_sizes);
    sizes.push(classes);

    let mut rng = SplitRng::seed_from(cfg.seed);
    let mut head = MlpHead::init(&sizes, &mut rng)?;
    let mut adam = AdamState::new(&head.tensors());
    let lr = T::from_f64_lossy(cfg.lr);

    let mut order: Vec<usize> = (0..features.len()).collect();
    for _epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let mut grads = head.zeros_like();
            let mut logit_rows = Vec::with_capacity(batch.len());
            let mut caches = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            for &i in batch {
                let (logits, cache) = head.forward(&features[i])?;
                logit_rows.push(logits);
                caches.push(cache);
                targets.push(labels[i]);
            }
            let (_, d_rows) = softmax_cross_entropy(&logit_rows, &targets, u32::MAX)?;
            for (cache, d_logits) in caches.iter().zip(d_rows.iter()) {
                head.backward(cache, d_logits, &mut grads);
            }
            let grad_refs: Vec<&Tensor<T>> = grads.tensors().into_iter().collect();
            let mut param_refs = head.tensors_mut();
            adam.step(&mut param_refs, &grad_refs, lr)?;
        }
    }
    Ok(head)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_features_hand_example() {
        let f = pair_features(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(f, vec![1.0, 2.0, 3.0, 4.0, 3.0, 8.0, 2.0, 2.0]);
    }

    #[test]
    fn pair_features_equal_embeddings() {
        let p = [0.5, -1.5];
        let f = pair_features(&p, &p).unwrap();
        assert_eq!(&f[4..6], &[0.25, 2.25]); // p squared
        assert_eq!(&f[6..8], &[0.0, 0.0]);
    }

    #[test]
    fn pair_features_zero_case_and_dim_check() {
        assert_eq!(pair_features(&[0.0; 2], &[0.0; 2]).unwrap(), vec![0.0; 8]);
        assert!(pair_features(&[0.0; 2], &[0.0; 3]).is_err());
    }

    #[test]
    fn pair_features_swap_covariance() {
        let p = [1.0, -2.0];
        let h = [0.5, 3.0];
        let f_ph = pair_features(&p, &h).unwrap();
        let f_hp = pair_features(&h, &p).unwrap();
        assert_eq!(&f_ph[..2], &f_hp[2..4]);
        assert_eq!(&f_ph[2..4], &f_hp[..2]);
        assert_eq!(&f_ph[4..6], &f_hp[4..6]);
        assert_eq!(&f_ph[6..8], &f_hp[6..8]);
    }

    #[test]
    fn pair_features_backward_matches_central_differences() {
        use crate::gradcheck::{central_diff_grad, rel_error};
        let p = [0.4f64, -0.9, 1.3];
        let h = [-0.2f64, 0.8, 0.5];
        // scalar loss: weighted sum of features
        let weights: Vec<f64> = (0..12).map(|i| 0.1 * (i as f64 + 1.0)).collect();
        let loss = |vars: &[f64]| {
            let f = pair_features(&vars[..3], &vars[3..]).unwrap();
            f.iter().zip(weights.iter()).map(|(a, b)| a * b).sum::<f64>()
        };
        let (dp, dh) = pair_features_backward(&p, &h, &weights);
        let mut analytic = dp.clone();
        analytic.extend_from_slice(&dh);
        let vars: Vec<f64> = p.iter().chain(h.iter()).copied().collect();
        let numeric = central_diff_grad(loss, &vars, 1e-6);
        for (n, a) in numeric.iter().zip(analytic.iter()) {
            assert!(rel_error(*n, *a) < 1e-6, "{n} vs {a}");
        }
    }

    fn separable_dataset() -> (Vec<Vec<f64>>, Vec<u32>) {
        // 20 points, two linearly separable clusters
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let o = i as f64 * 0.05;
            features.push(vec![1.0 + o, 1.0 - o]);
            labels.push(0);
            features.push(vec![-1.0 - o, -1.0 + o]);
            labels.push(1);
        }
        (features, labels)
    }

    #[test]
    fn linearly_separable_toy_reaches_full_accuracy() {
        let (features, labels) = separable_dataset();
        let cfg = HeadTrainConfig {
            epochs: 200,
            ..Default::default()
        };
        let head = train_head(&features, &labels, &[8], 2, &cfg).unwrap();
        assert_eq!(head.accuracy(&features, &labels).unwrap(), 1.0);
    }

    #[test]
    fn single_class_data_is_rejected() {
        let features = vec![vec![1.0f32], vec![2.0]];
        let labels = vec![0, 0];
        assert_eq!(
            train_head(&features, &labels, &[4], 2, &HeadTrainConfig::default()).unwrap_err(),
            Error::MissingClass { class: 1 }
        );
    }

    #[test]
    fn training_is_seed_deterministic() {
        let (features, labels) = separable_dataset();
        let cfg = HeadTrainConfig {
            epochs: 5,
            ..Default::default()
        };
        let a = train_head(&features, &labels, &[6, 4], 2, &cfg).unwrap();
        let b = train_head(&features, &labels, &[6, 4], 2, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn accuracy_is_order_invariant() {
        let (features, labels) = separable_dataset();
        let cfg = HeadTrainConfig {
            epochs: 50,
            ..Default::default()
        };
        let head = train_head(&features, &labels, &[8], 2, &cfg).unwrap();
        let acc = head.accuracy(&features, &labels).unwrap();
        let mut rev_f = features.clone();
        rev_f.reverse();
        let mut rev_l = labels.clone();
        rev_l.reverse();
        assert_eq!(head.accuracy(&rev_f, &rev_l).unwrap(), acc);
    }
}
