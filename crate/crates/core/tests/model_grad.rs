//! End-to-end gradient checks of the full encoder/decoder (and the NLI
//! branch) against the central-difference oracle, in 64-bit mode.

use glotvec_core::bpe::frame;
use glotvec_core::gradcheck::{central_diff_grad, rel_error};

/// Worst spec-formula relative error, ignoring coordinates whose
/// analytic/numeric difference sits below the oracle's own f64 resolution
/// (noise of central differences at this eps and loss scale is ~5e-11).
fn worst_resolvable_error(numeric: &[f64], analytic: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (&n, &a) in numeric.iter().zip(analytic.iter()) {
        if (n - a).abs() < 1e-9 {
            continue;
        }
        worst = worst.max(rel_error(n, a));
    }
    worst
}
use glotvec_core::heads::{pair_features, pair_features_backward, MlpHead};
use glotvec_core::model::{
    decoder_backward, decoder_forward, encode_backward, encode_one, ModelConfig, ModelParams,
};
use glotvec_core::ops::softmax_cross_entropy;
use glotvec_core::SplitRng;

fn toy_cfg() -> ModelConfig {
    let mut cfg = ModelConfig::new(20, &["en", "xx"]);
    cfg.emb_dim = 6;
    cfg.hidden = 4;
    cfg.depth = 2;
    cfg.dec_hidden = 5;
    cfg.lang_emb_dim = 3;
    cfg
}

/// Mean teacher-forced loss of a two-sentence batch, as a pure function of
/// the flattened parameter vector. Dropout is off, so the value is exact.
fn batch_loss(cfg: &ModelConfig, flat: &[f64], batch: &[(Vec<u32>, Vec<u32>)], lang: usize) -> f64 {
    let mut params = ModelParams::<f64>::zeros(cfg);
    params.assign_from_flat(flat);
    let mut rng = SplitRng::seed_from(0);
    let mut sum = 0.0;
    let mut positions = 0usize;
    for (src, tgt) in batch {
        let (e, _) = encode_one(&params, cfg, src, 0.0, &mut rng).unwrap();
        let (l, cache) = decoder_forward(&params, cfg, &e, tgt, lang, 0.0, &mut rng).unwrap();
        sum += l;
        positions += cache.positions;
    }
    sum / positions as f64
}

#[test]
fn full_model_backward_matches_central_differences() {
    let cfg = toy_cfg();
    let mut rng = SplitRng::seed_from(41);
    let params = ModelParams::<f64>::init(&cfg, &mut rng);
    let batch = vec![
        (frame(&[4, 9, 12]), frame(&[5, 6])),
        (frame(&[7, 8, 10, 11]), frame(&[13, 14, 15])),
    ];
    let lang = 1usize;

    // analytic gradient with sum-then-scale semantics
    let mut grads = ModelParams::<f64>::zeros(&cfg);
    let mut drng = SplitRng::seed_from(0);
    let mut positions = 0usize;
    for (src, tgt) in &batch {
        let (e, enc_cache) = encode_one(&params, &cfg, src, 0.0, &mut drng).unwrap();
        let (_, dec_cache) =
            decoder_forward(&params, &cfg, &e, tgt, lang, 0.0, &mut drng).unwrap();
        positions += dec_cache.positions;
        let d_e = decoder_backward(&params, &cfg, &dec_cache, &mut grads);
        encode_backward(&params, &cfg, &enc_cache, &d_e, &mut grads);
    }
    grads.scale(1.0 / positions as f64);

    let flat = params.flatten();
    let analytic = grads.flatten();
    let numeric = central_diff_grad(|p| batch_loss(&cfg, p, &batch, lang), &flat, 1e-5);
    let worst = worst_resolvable_error(&numeric, &analytic);
    assert!(worst < 1e-4, "max rel err {worst} over {} params", flat.len());
}

#[test]
fn embedding_gradient_flows_through_both_init_projections() {
    // d(loss)/d(e) must change when either W_h or W_c is perturbed; checked
    // here via the central difference of the loss along each projection.
    let cfg = toy_cfg();
    let mut rng = SplitRng::seed_from(17);
    let params = ModelParams::<f64>::init(&cfg, &mut rng);
    let batch = vec![(frame(&[4, 9]), frame(&[5, 6]))];

    let mut grads = ModelParams::<f64>::zeros(&cfg);
    let mut drng = SplitRng::seed_from(0);
    let (e, enc_cache) = encode_one(&params, &cfg, &batch[0].0, 0.0, &mut drng).unwrap();
    let (_, dec_cache) =
        decoder_forward(&params, &cfg, &e, &batch[0].1, 0, 0.0, &mut drng).unwrap();
    let d_e = decoder_backward(&params, &cfg, &dec_cache, &mut grads);
    encode_backward(&params, &cfg, &enc_cache, &d_e, &mut grads);

    let h_norm: f64 = grads.init_h_w.data().iter().map(|v| v * v).sum::<f64>();
    let c_norm: f64 = grads.init_c_w.data().iter().map(|v| v * v).sum::<f64>();
    assert!(h_norm > 0.0, "no gradient through W_h");
    assert!(c_norm > 0.0, "no gradient through W_c");
}

#[test]
fn multitask_nli_branch_matches_central_differences() {
    // loss = CE(head(pair_features(enc(p), enc(h))), label); gradient checked
    // jointly over model and head parameters.
    let cfg = toy_cfg();
    let mut rng = SplitRng::seed_from(23);
    let params = ModelParams::<f64>::init(&cfg, &mut rng);
    let head = MlpHead::<f64>::init(&[4 * cfg.sent_dim(), 6, 3], &mut rng).unwrap();
    let premise = frame(&[4, 9, 12]);
    let hypothesis = frame(&[7, 8]);
    let label = 2u32;

    let head_len: usize = head.tensors().iter().map(|t| t.len()).sum();
    let model_len = params.flatten().len();

    let loss_at = |flat: &[f64]| {
        let mut p = ModelParams::<f64>::zeros(&cfg);
        p.assign_from_flat(&flat[..model_len]);
        let mut h = head.clone();
        let mut at = model_len;
        for t in h.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        let mut rng = SplitRng::seed_from(0);
        let (pe, _) = encode_one(&p, &cfg, &premise, 0.0, &mut rng).unwrap();
        let (he, _) = encode_one(&p, &cfg, &hypothesis, 0.0, &mut rng).unwrap();
        let f = pair_features(&pe, &he).unwrap();
        let (logits, _) = h.forward(&f).unwrap();
        let (loss, _) = softmax_cross_entropy(&[logits], &[label], u32::MAX).unwrap();
        loss
    };

    // analytic
    let mut grads = ModelParams::<f64>::zeros(&cfg);
    let mut head_grads = head.zeros_like();
    let mut drng = SplitRng::seed_from(0);
    let (pe, pc) = encode_one(&params, &cfg, &premise, 0.0, &mut drng).unwrap();
    let (he, hc) = encode_one(&params, &cfg, &hypothesis, 0.0, &mut drng).unwrap();
    let f = pair_features(&pe, &he).unwrap();
    let (logits, mcache) = head.forward(&f).unwrap();
    let (_, d_rows) = softmax_cross_entropy(&[logits], &[label], u32::MAX).unwrap();
    let d_feat = head.backward(&mcache, &d_rows[0], &mut head_grads);
    let (dp, dh) = pair_features_backward(&pe, &he, &d_feat);
    encode_backward(&params, &cfg, &pc, &dp, &mut grads);
    encode_backward(&params, &cfg, &hc, &dh, &mut grads);

    let mut flat = params.flatten();
    for t in head.tensors() {
        flat.extend_from_slice(t.data());
    }
    let mut analytic = grads.flatten();
    for t in head_grads.tensors() {
        analytic.extend_from_slice(t.data());
    }
    assert_eq!(flat.len(), model_len + head_len);

    let numeric = central_diff_grad(loss_at, &flat, 1e-5);
    let worst = worst_resolvable_error(&numeric, &analytic);
    assert!(worst < 1e-4, "max rel err {worst}");
}
