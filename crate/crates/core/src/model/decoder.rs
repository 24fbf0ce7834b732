//! Teacher-forced translation decoder conditioned on the sentence embedding
//! and a language ID embedding.

use alloc::vec;
use alloc::vec::Vec;

use crate::bpe::{BOS_ID, EOS_ID, PAD_ID};
use crate::error::{Error, Result};
use crate::linalg::{add_acc, matvec_acc, matvec_t_acc, outer_acc};
use crate::lstm::CellCache;
use crate::ops::{dropout_backward, dropout_forward};
use crate::rng::SplitRng;
use crate::tensor::Scalar;

use super::{ModelConfig, ModelParams};

/// Decoder start states from a sentence embedding:
/// `h0 = tanh(W_h e + b_h)`, `c0 = tanh(W_c e + b_c)`.
pub fn decoder_init<T: Scalar>(
    params: &ModelParams<T>,
    e: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    let sent_dim = params.init_h_w.cols();
    let dec_hidden = params.init_h_w.rows();
    if e.len() != sent_dim {
        return Err(Error::DimMismatch {
            op: "decoder_init embedding",
            expected: sent_dim,
            got: e.len(),
        });
    }
    let mut h0 = params.init_h_b.data().to_vec();
    matvec_acc(params.init_h_w.data(), dec_hidden, sent_dim, e, &mut h0);
    for v in &mut h0 {
        *v = v.tanh();
    }
    let mut c0 = params.init_c_b.data().to_vec();
    matvec_acc(params.init_c_w.data(), dec_hidden, sent_dim, e, &mut c0);
    for v in &mut c0 {
        *v = v.tanh();
    }
    Ok((h0, c0))
}

/// Forward caches for one teacher-forced sequence.
pub struct DecoderCache<T> {
    e: Vec<T>,
    lang_id: usize,
    tgt: Vec<u32>,
    h0: Vec<T>,
    c0: Vec<T>,
    steps: Vec<CellCache<T>>,
    hs: Vec<Vec<T>>,
    logits: Vec<Vec<T>>,
    emb_keep: Vec<Vec<bool>>,
    dropout_p: f64,
    /// Number of scored next-token positions.
    pub positions: usize,
}

/// Runs the decoder over one framed target `[BOS, ..., EOS]` with teacher
/// forcing. At step `t` the input is the concatenation
/// `[token-embedding(tgt[t]); sentence-embedding; language-embedding]` and
/// the model predicts `tgt[t+1]`. Dropout touches only the token-embedding
/// slice. Returns the summed cross-entropy and its caches; the caller
/// normalizes by the batch-wide position count.
pub fn decoder_forward<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    e: &[T],
    tgt: &[u32],
    lang_id: usize,
    dropout_p: f64,
    rng: &mut SplitRng,
) -> Result<(T, DecoderCache<T>)> {
    if tgt.len() < 2 {
        return Err(Error::EmptySequence);
    }
    for &id in tgt {
        if id as usize >= cfg.vocab_size {
            return Err(Error::IdOutOfRange {
                id,
                vocab: cfg.vocab_size,
            });
        }
    }
    if lang_id >= cfg.langs.len() {
        return Err(Error::Invalid(alloc::format!(
            "language id {lang_id} out of range"
        )));
    }
    let (h0, c0) = decoder_init(params, e)?;
    let lang_row = params.lang_embed.row(lang_id);
    let dec_hidden = cfg.dec_hidden;
    let vocab = cfg.vocab_size;

    let mut h_prev = h0.clone();
    let mut c_prev = c0.clone();
    let mut steps = Vec::new();
    let mut hs = Vec::new();
    let mut logits_all = Vec::new();
    let mut emb_keep = Vec::new();
    let mut loss_sum = T::zero();
    let mut positions = 0usize;

    for t in 0..tgt.len() - 1 {
        if tgt[t] == PAD_ID {
            break; // trailing padding: nothing left to score
        }
        let next = tgt[t + 1];
        if next == PAD_ID {
            break;
        }

        let mut emb = params.dec_embed.row(tgt[t] as usize).to_vec();
        emb_keep.push(dropout_forward(&mut emb, dropout_p, rng));
        let mut x = Vec::with_capacity(cfg.dec_input_dim());
        x.extend_from_slice(&emb);
        x.extend_from_slice(e);
        x.extend_from_slice(lang_row);

        let (h_t, c_t, cache) = params.dec_cell.forward(&x, &h_prev, &c_prev)?;
        let mut logits = params.out_b.data().to_vec();
        matvec_acc(params.out_w.data(), vocab, dec_hidden, &h_t, &mut logits);

        let max = logits.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut z = T::zero();
        for &v in &logits {
            z = z + (v - max).exp();
        }
        loss_sum = loss_sum + (max + z.ln() - logits[next as usize]);
        positions += 1;

        steps.push(cache);
        hs.push(h_t.clone());
        logits_all.push(logits);
        h_prev = h_t;
        c_prev = c_t;
    }

    if positions == 0 {
        return Err(Error::NoScoredRows);
    }

    Ok((
        loss_sum,
        DecoderCache {
            e: e.to_vec(),
            lang_id,
            tgt: tgt.to_vec(),
            h0,
            c0,
            steps,
            hs,
            logits: logits_all,
            emb_keep,
            dropout_p,
            positions,
        },
    ))
}

/// Backward through [`decoder_forward`] with sum (not mean) semantics;
/// parameter gradients accumulate into `grads`. Returns the gradient with
/// respect to the sentence embedding, which the encoder backward consumes.
pub fn decoder_backward<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    cache: &DecoderCache<T>,
    grads: &mut ModelParams<T>,
) -> Vec<T> {
    let vocab = cfg.vocab_size;
    let dec_hidden = cfg.dec_hidden;
    let sent_dim = cfg.sent_dim();
    let n_steps = cache.steps.len();

    let mut d_e = vec![T::zero(); sent_dim];
    let mut dh_next = vec![T::zero(); dec_hidden];
    let mut dc_next = vec![T::zero(); dec_hidden];

    for t in (0..n_steps).rev() {
        let logits = &cache.logits[t];
        let next = cache.tgt[t + 1] as usize;
        let max = logits.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut z = T::zero();
        for &v in logits {
            z = z + (v - max).exp();
        }
        let mut d_logits: Vec<T> = logits.iter().map(|&v| (v - max).exp() / z).collect();
        d_logits[next] = d_logits[next] - T::one();

        outer_acc(
            grads.out_w.data_mut(),
            vocab,
            dec_hidden,
            &d_logits,
            &cache.hs[t],
        );
        add_acc(grads.out_b.data_mut(), &d_logits);

        let mut dh = dh_next.clone();
        matvec_t_acc(params.out_w.data(), vocab, dec_hidden, &d_logits, &mut dh);

        let (dx, dh_prev, dc_prev) =
            params
                .dec_cell
                .backward(&cache.steps[t], &dh, &dc_next, &mut grads.dec_cell);

        let mut d_emb = dx[..cfg.emb_dim].to_vec();
        dropout_backward(&mut d_emb, &cache.emb_keep[t], cache.dropout_p);
        let row = grads.dec_embed.row_mut(cache.tgt[t] as usize);
        add_acc(row, &d_emb);

        add_acc(&mut d_e, &dx[cfg.emb_dim..cfg.emb_dim + sent_dim]);
        let lang_row = grads.lang_embed.row_mut(cache.lang_id);
        add_acc(lang_row, &dx[cfg.emb_dim + sent_dim..]);

        dh_next = dh_prev;
        dc_next = dc_prev;
    }

    // through the tanh-squashed init projections
    let one = T::one();
    let d_pre_h: Vec<T> = dh_next
        .iter()
        .zip(cache.h0.iter())
        .map(|(&d, &h)| d * (one - h * h))
        .collect();
    outer_acc(
        grads.init_h_w.data_mut(),
        dec_hidden,
        sent_dim,
        &d_pre_h,
        &cache.e,
    );
    add_acc(grads.init_h_b.data_mut(), &d_pre_h);
    matvec_t_acc(params.init_h_w.data(), dec_hidden, sent_dim, &d_pre_h, &mut d_e);

    let d_pre_c: Vec<T> = dc_next
        .iter()
        .zip(cache.c0.iter())
        .map(|(&d, &c)| d * (one - c * c))
        .collect();
    outer_acc(
        grads.init_c_w.data_mut(),
        dec_hidden,
        sent_dim,
        &d_pre_c,
        &cache.e,
    );
    add_acc(grads.init_c_b.data_mut(), &d_pre_c);
    matvec_t_acc(params.init_c_w.data(), dec_hidden, sent_dim, &d_pre_c, &mut d_e);

    d_e
}

/// Mean teacher-forced cross-entropy of a batch: total summed loss divided by
/// the total number of scored positions across all sequences.
pub fn teacher_forced_loss<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    embeddings: &[Vec<T>],
    targets: &[Vec<u32>],
    target_lang: &str,
    dropout_p: f64,
    rng: &mut SplitRng,
) -> Result<T> {
    if embeddings.len() != targets.len() {
        return Err(Error::DimMismatch {
            op: "teacher_forced_loss batch",
            expected: embeddings.len(),
            got: targets.len(),
        });
    }
    let lang_id = cfg.lang_id(target_lang)?;
    let mut sum = T::zero();
    let mut positions = 0usize;
    for (e, tgt) in embeddings.iter().zip(targets.iter()) {
        let (s, cache) = decoder_forward(params, cfg, e, tgt, lang_id, dropout_p, rng)?;
        sum = sum + s;
        positions += cache.positions;
    }
    Ok(sum / T::from_f64_lossy(positions as f64))
}

/// Greedy decoding from a sentence embedding; exists for tests and
/// inspection only. Returns generated ids up to and including EOS.
pub fn greedy_decode<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    e: &[T],
    lang_id: usize,
    max_len: usize,
) -> Result<Vec<u32>> {
    let (mut h_prev, mut c_prev) = decoder_init(params, e)?;
    let lang_row = params.lang_embed.row(lang_id);
    let mut token = BOS_ID;
    let mut out = Vec::new();
    for _ in 0..max_len {
        let mut x = Vec::with_capacity(cfg.dec_input_dim());
        x.extend_from_slice(params.dec_embed.row(token as usize));
        x.extend_from_slice(e);
        x.extend_from_slice(lang_row);
        let (h_t, c_t, _) = params.dec_cell.forward(&x, &h_prev, &c_prev)?;
        let mut logits = params.out_b.data().to_vec();
        matvec_acc(
            params.out_w.data(),
            cfg.vocab_size,
            cfg.dec_hidden,
            &h_t,
            &mut logits,
        );
        let mut best = 0usize;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        out.push(best as u32);
        if best as u32 == EOS_ID {
            break;
        }
        token = best as u32;
        h_prev = h_t;
        c_prev = c_t;
    }
    Ok(out)
}
