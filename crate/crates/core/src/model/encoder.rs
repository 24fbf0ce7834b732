//! Stacked BiLSTM encoder with masked max-pooling.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::executor::Executor;
use crate::ops::{dropout_backward, dropout_forward, maxpool_backward, maxpool_time};
use crate::rng::SplitRng;
use crate::tensor::Scalar;

use crate::lstm::{run_sequence, run_sequence_backward, SequenceRun};

use super::{ModelConfig, ModelParams};

struct LayerRun<T> {
    fwd: SequenceRun<T>,
    bwd: SequenceRun<T>,
}

/// Forward caches of one encoded sequence, consumed by [`encode_backward`].
pub struct EncoderCache<T> {
    ids: Vec<u32>,
    emb_keep: Vec<Vec<bool>>,
    inter_keep: Vec<Vec<Vec<bool>>>, // per layer > 0, per timestep
    layers: Vec<LayerRun<T>>,
    argmax: Vec<usize>,
    steps: usize,
    dropout_p: f64,
}

fn check_ids(ids: &[u32], cfg: &ModelConfig) -> Result<()> {
    if ids.is_empty() {
        return Err(Error::EmptySequence);
    }
    for &id in ids {
        if id as usize >= cfg.vocab_size {
            return Err(Error::IdOutOfRange {
                id,
                vocab: cfg.vocab_size,
            });
        }
    }
    Ok(())
}

/// Encodes one id sequence into a sentence embedding of dimension
/// `cfg.sent_dim()`, returning the caches needed for the backward pass.
///
/// With `dropout_p > 0` (training) inverted dropout is applied to the input
/// embeddings and to the activations between stacked layers. There is no
/// language input here and none anywhere below this call.
pub fn encode_one<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    ids: &[u32],
    dropout_p: f64,
    rng: &mut SplitRng,
) -> Result<(Vec<T>, EncoderCache<T>)> {
    check_ids(ids, cfg)?;
    let steps = ids.len();

    let mut inputs: Vec<Vec<T>> = ids
        .iter()
        .map(|&id| params.enc_embed.row(id as usize).to_vec())
        .collect();
    let mut emb_keep = Vec::with_capacity(steps);
    for row in &mut inputs {
        emb_keep.push(dropout_forward(row, dropout_p, rng));
    }

    let mut layers = Vec::with_capacity(cfg.depth);
    let mut inter_keep: Vec<Vec<Vec<bool>>> = Vec::new();
    for li in 0..cfg.depth {
        let layer = &params.enc_layers[li];
        let fwd = run_sequence(&layer.fwd, &inputs)?;
        let mut rev_inputs: Vec<Vec<T>> = inputs.iter().rev().cloned().collect();
        let bwd = run_sequence(&layer.bwd, &rev_inputs)?;
        rev_inputs.clear();

        let mut outputs: Vec<Vec<T>> = Vec::with_capacity(steps);
        for t in 0..steps {
            let mut row = fwd.outputs[t].clone();
            row.extend_from_slice(&bwd.outputs[steps - 1 - t]);
            outputs.push(row);
        }
        layers.push(LayerRun { fwd, bwd });

        if li + 1 < cfg.depth {
            let mut keeps = Vec::with_capacity(steps);
            for row in &mut outputs {
                keeps.push(dropout_forward(row, dropout_p, rng));
            }
            inter_keep.push(keeps);
        }
        inputs = outputs;
    }

    let mask = vec![true; steps];
    let (pooled, argmax) = maxpool_time(&inputs, &mask)?;

    Ok((
        pooled,
        EncoderCache {
            ids: ids.to_vec(),
            emb_keep,
            inter_keep,
            layers,
            argmax,
            steps,
            dropout_p,
        },
    ))
}

/// Backward through [`encode_one`]: routes the pooled gradient to the argmax
/// timesteps, walks every layer's both directions, undoes dropout scaling and
/// accumulates into `grads` (including the embedding rows of `ids`).
pub fn encode_backward<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    cache: &EncoderCache<T>,
    d_emb: &[T],
    grads: &mut ModelParams<T>,
) {
    let steps = cache.steps;
    let h = cfg.hidden;

    let mut d_out: Vec<Vec<T>> = vec![vec![T::zero(); cfg.sent_dim()]; steps];
    maxpool_backward(d_emb, &cache.argmax, &mut d_out);

    for li in (0..cfg.depth).rev() {
        let layer = &params.enc_layers[li];
        let run = &cache.layers[li];

        let d_fwd: Vec<Vec<T>> = d_out.iter().map(|row| row[..h].to_vec()).collect();
        let d_bwd_rev: Vec<Vec<T>> = (0..steps)
            .map(|i| d_out[steps - 1 - i][h..].to_vec())
            .collect();

        let d_in_fwd = run_sequence_backward(
            &layer.fwd,
            &run.fwd,
            &d_fwd,
            &mut grads.enc_layers[li].fwd,
        );
        let d_in_bwd_rev = run_sequence_backward(
            &layer.bwd,
            &run.bwd,
            &d_bwd_rev,
            &mut grads.enc_layers[li].bwd,
        );

        let mut d_inputs: Vec<Vec<T>> = Vec::with_capacity(steps);
        for t in 0..steps {
            let mut row = d_in_fwd[t].clone();
            for (a, b) in row.iter_mut().zip(d_in_bwd_rev[steps - 1 - t].iter()) {
                *a = *a + *b;
            }
            d_inputs.push(row);
        }

        if li > 0 {
            for (t, row) in d_inputs.iter_mut().enumerate() {
                dropout_backward(row, &cache.inter_keep[li - 1][t], cache.dropout_p);
            }
        }
        d_out = d_inputs;
    }

    for (t, row) in d_out.iter_mut().enumerate() {
        dropout_backward(row, &cache.emb_keep[t], cache.dropout_p);
        let target = grads.enc_embed.row_mut(cache.ids[t] as usize);
        for (g, d) in target.iter_mut().zip(row.iter()) {
            *g = *g + *d;
        }
    }
}

/// Inference with an explicit timestep mask: masked positions are dropped
/// before the recurrence, so they cannot influence the embedding.
pub fn encode_masked<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    ids: &[u32],
    mask: &[bool],
) -> Result<Vec<T>> {
    if ids.len() != mask.len() {
        return Err(Error::DimMismatch {
            op: "encode_masked mask",
            expected: ids.len(),
            got: mask.len(),
        });
    }
    let kept: Vec<u32> = ids
        .iter()
        .zip(mask.iter())
        .filter_map(|(&id, &m)| m.then_some(id))
        .collect();
    let mut rng = SplitRng::seed_from(0); // dropout 0 draws nothing
    encode_one(params, cfg, &kept, 0.0, &mut rng).map(|(e, _)| e)
}

/// Encodes many sequences (inference, no dropout); order-preserving and
/// independent of the executor's parallelism.
pub fn encode_batch<T: Scalar, E: Executor>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    seqs: &[Vec<u32>],
    exec: &E,
) -> Result<Vec<Vec<T>>> {
    let results = exec.map(seqs.len(), |i| {
        let mut rng = SplitRng::seed_from(0);
        encode_one(params, cfg, &seqs[i], 0.0, &mut rng).map(|(e, _)| e)
    });
    results.into_iter().collect()
}
