//! Training-loop behavior on small synthetic setups: memorization,
//! loss-decrease regression, determinism, schedule accounting and the
//! inertness of a zero-weighted NLI objective.

use glotvec_core::adam::AdamState;
use glotvec_core::bpe::{self, learn_bpe};
use glotvec_core::model::{
    decoder_backward, decoder_forward, encode_backward, encode_one, greedy_decode, ModelConfig,
    ModelParams,
};
use glotvec_core::tensor::Tensor;
use glotvec_core::text::{generate_synthetic_bitext, Sentence, SyntheticLangSpec, Transform};
use glotvec_core::trainer::{
    encode_corpus, EncodedCorpus, NliData, NoopObserver, ResumeState, TrainConfig, TrainSession,
};
use glotvec_core::{Serial, SplitRng};

/// Deterministic template sentences over a tiny vocabulary.
fn seed_sentences(n: usize) -> Vec<Sentence> {
    let subjects = ["the cat", "a dog", "the bird", "my friend", "one robot"];
    let verbs = ["sees", "chases", "likes", "finds", "paints"];
    let objects = ["the ball", "a tree", "the river", "some food", "that house"];
    let tails = ["today", "quickly", "at home", "again", "outside"];
    let mut out = Vec::with_capacity(n);
    let mut i = 0usize;
    'outer: for t in 0..tails.len() {
        for s in 0..subjects.len() {
            for v in 0..verbs.len() {
                for o in 0..objects.len() {
                    let text = format!(
                        "{} {} {} {}",
                        subjects[s], verbs[v], objects[o], tails[t]
                    );
                    out.push(Sentence::new(&text, "en").unwrap());
                    i += 1;
                    if i == n {
                        break 'outer;
                    }
                }
            }
        }
    }
    out
}

fn toy_setup(
    n_sentences: usize,
    hidden: usize,
) -> (ModelConfig, Vec<EncodedCorpus>, bpe::BpeModel) {
    let seeds = seed_sentences(n_sentences);
    let caesar = SyntheticLangSpec {
        name: "enc".to_string(),
        transform: Transform::CaesarCipher { shift: 3 },
        seed: 1,
    };
    let reverse = SyntheticLangSpec {
        name: "rev".to_string(),
        transform: Transform::WordReverse,
        seed: 2,
    };
    let to_caesar = generate_synthetic_bitext(&seeds, &caesar).unwrap();
    let to_reverse = generate_synthetic_bitext(&seeds, &reverse).unwrap();

    let mut corpora_tokens: Vec<Vec<String>> = Vec::new();
    for c in [&to_caesar, &to_reverse] {
        for (s, t) in &c.pairs {
            corpora_tokens.push(glotvec_core::text::normalize_and_tokenize(s.text()));
            corpora_tokens.push(glotvec_core::text::normalize_and_tokenize(t.text()));
        }
    }
    let bpe = learn_bpe(&corpora_tokens, 120).unwrap();

    let mut cfg = ModelConfig::new(bpe.vocab_size(), &["en", "enc", "rev"]);
    cfg.emb_dim = 32;
    cfg.hidden = hidden;
    cfg.depth = 1;
    cfg.dec_hidden = 96;
    cfg.lang_emb_dim = 8;

    let corpora = vec![encode_corpus(&to_caesar, &bpe), encode_corpus(&to_reverse, &bpe)];
    (cfg, corpora, bpe)
}

#[test]
fn single_pair_memorization_in_200_steps() {
    // one sentence trained on itself: loss drops below 0.1
    let mut cfg = ModelConfig::new(30, &["en", "xx"]);
    cfg.emb_dim = 32;
    cfg.hidden = 32;
    cfg.depth = 1;
    cfg.dec_hidden = 64;
    cfg.lang_emb_dim = 8;

    let src = bpe::frame(&[5, 9, 14, 21]);
    let tgt = bpe::frame(&[6, 11, 17]);
    let lang = 1usize;

    let mut rng = SplitRng::seed_from(3);
    let mut params = ModelParams::<f32>::init(&cfg, &mut rng);
    let tensor_refs: Vec<&Tensor<f32>> = params.tensors().into_iter().map(|(_, t)| t).collect();
    let mut adam = AdamState::new(&tensor_refs);

    let mut last = f32::INFINITY;
    for _ in 0..200 {
        let mut grads = ModelParams::<f32>::zeros(&cfg);
        let mut drng = SplitRng::seed_from(0);
        let (e, enc_cache) = encode_one(&params, &cfg, &src, 0.0, &mut drng).unwrap();
        let (loss_sum, dec_cache) =
            decoder_forward(&params, &cfg, &e, &tgt, lang, 0.0, &mut drng).unwrap();
        let d_e = decoder_backward(&params, &cfg, &dec_cache, &mut grads);
        encode_backward(&params, &cfg, &enc_cache, &d_e, &mut grads);
        grads.scale(1.0 / dec_cache.positions as f32);
        last = loss_sum / dec_cache.positions as f32;

        let grad_refs: Vec<&Tensor<f32>> = grads.tensors().into_iter().map(|(_, t)| t).collect();
        let mut param_refs: Vec<&mut Tensor<f32>> =
            params.tensors_mut().into_iter().map(|(_, t)| t).collect();
        adam.step(&mut param_refs, &grad_refs, 0.001).unwrap();
    }
    assert!(last < 0.1, "loss after 200 steps: {last}");
}

#[test]
fn two_synthetic_languages_loss_drops_below_quarter() {
    // regression baseline: caesar + word-reverse pivots, hidden 64, depth 1,
    // 30 epochs; final mean loss < 25% of the first epoch's
    let (cfg, corpora, _) = toy_setup(60, 64);
    let mut tc = TrainConfig::new(["enc", "rev"], 11);
    tc.epochs = 30;
    tc.max_tokens_per_batch = 80;
    let session = TrainSession::<f32> {
        corpora: &corpora,
        model_cfg: &cfg,
        cfg: &tc,
        nli: None,
        resume: None,
    };
    let outcome = session.run(&Serial, &mut NoopObserver).unwrap();

    let epoch_mean = |e: usize| {
        let records: Vec<f64> = outcome
            .log
            .iter()
            .filter(|r| r.epoch == e)
            .map(|r| r.loss)
            .collect();
        records.iter().sum::<f64>() / records.len() as f64
    };
    let first = epoch_mean(0);
    let last = epoch_mean(29);
    assert!(
        last < 0.25 * first,
        "first-epoch loss {first}, final loss {last}"
    );
}

#[test]
fn training_is_bitwise_deterministic() {
    let (cfg, corpora, _) = toy_setup(12, 8);
    let mut tc = TrainConfig::new(["enc", "rev"], 5);
    tc.epochs = 2;
    tc.max_tokens_per_batch = 64;
    let run = || {
        TrainSession::<f32> {
            corpora: &corpora,
            model_cfg: &cfg,
            cfg: &tc,
            nli: None,
            resume: None,
        }
        .run(&Serial, &mut NoopObserver)
        .unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.params, b.params);
    assert_eq!(a.log, b.log);
}

#[test]
fn every_pair_is_visited_once_per_epoch() {
    let (cfg, corpora, _) = toy_setup(14, 8);
    let mut tc = TrainConfig::new(["enc", "rev"], 5);
    tc.epochs = 2;
    tc.max_tokens_per_batch = 60;
    let outcome = TrainSession::<f32> {
        corpora: &corpora,
        model_cfg: &cfg,
        cfg: &tc,
        nli: None,
        resume: None,
    }
    .run(&Serial, &mut NoopObserver)
    .unwrap();

    // scored positions per pair = framed target length - 1
    for (corpus, task_name) in [(&corpora[0], "en-enc"), (&corpora[1], "en-rev")] {
        let expected: usize = corpus.pairs.iter().map(|(_, t)| t.len() - 1).sum();
        for epoch in 0..2 {
            let tokens: usize = outcome
                .log
                .iter()
                .filter(|r| r.epoch == epoch && r.task == task_name)
                .map(|r| r.tokens)
                .sum();
            assert_eq!(tokens, expected, "epoch {epoch} task {task_name}");
        }
    }
}

#[test]
fn zero_weight_nli_objective_is_inert() {
    let (cfg, corpora, _) = toy_setup(12, 8);
    let nli = NliData {
        pairs: vec![
            (bpe::frame(&[5, 6]), bpe::frame(&[7, 8]), 0),
            (bpe::frame(&[9, 10]), bpe::frame(&[11, 12]), 1),
        ],
        classes: 2,
        hidden_sizes: vec![8],
        batch_size: 2,
    };
    let mut tc = TrainConfig::new(["enc", "rev"], 5);
    tc.epochs = 1;
    tc.max_tokens_per_batch = 64;

    let without = TrainSession::<f32> {
        corpora: &corpora,
        model_cfg: &cfg,
        cfg: &tc,
        nli: None,
        resume: None,
    }
    .run(&Serial, &mut NoopObserver)
    .unwrap();
    let with_zero_weight = TrainSession::<f32> {
        corpora: &corpora,
        model_cfg: &cfg,
        cfg: &tc,
        nli: Some(&nli),
        resume: None,
    }
    .run(&Serial, &mut NoopObserver)
    .unwrap();
    assert_eq!(without.params, with_zero_weight.params);
    assert!(with_zero_weight.nli_head.is_none());

    let mut tc_active = tc.clone();
    tc_active.nli_weight = 0.5;
    let with_active = TrainSession::<f32> {
        corpora: &corpora,
        model_cfg: &cfg,
        cfg: &tc_active,
        nli: Some(&nli),
        resume: None,
    }
    .run(&Serial, &mut NoopObserver)
    .unwrap();
    assert_ne!(without.params, with_active.params);
    assert!(with_active.nli_head.is_some());
}

#[test]
fn swapping_target_language_changes_greedy_output() {
    let (cfg, corpora, _) = toy_setup(60, 64);
    let mut tc = TrainConfig::new(["enc", "rev"], 11);
    tc.epochs = 12;
    tc.max_tokens_per_batch = 320;
    let outcome = TrainSession::<f32> {
        corpora: &corpora,
        model_cfg: &cfg,
        cfg: &tc,
        nli: None,
        resume: None,
    }
    .run(&Serial, &mut NoopObserver)
    .unwrap();

    let lang_enc = cfg.lang_id("enc").unwrap();
    let lang_rev = cfg.lang_id("rev").unwrap();
    let mut differing = 0usize;
    for (src, _) in corpora[0].pairs.iter().take(10) {
        let mut rng = SplitRng::seed_from(0);
        let (e, _) = encode_one(&outcome.params, &cfg, src, 0.0, &mut rng).unwrap();
        let a = greedy_decode(&outcome.params, &cfg, &e, lang_enc, 24).unwrap();
        let b = greedy_decode(&outcome.params, &cfg, &e, lang_rev, 24).unwrap();
        if a != b {
            differing += 1;
        }
    }
    assert!(differing > 0, "language id had no effect on decoding");
}

#[test]
fn non_finite_loss_aborts_with_error() {
    let (cfg, corpora, _) = toy_setup(6, 8);
    let mut tc = TrainConfig::new(["enc", "rev"], 5);
    tc.epochs = 1;
    tc.max_tokens_per_batch = 64;

    let mut params = ModelParams::<f32>::init(&cfg, &mut SplitRng::seed_from(1));
    params.out_b.data_mut()[0] = f32::NAN;
    let refs: Vec<&Tensor<f32>> = params.tensors().into_iter().map(|(_, t)| t).collect();
    let adam = AdamState::new(&refs);
    let err = TrainSession::<f32> {
        corpora: &corpora,
        model_cfg: &cfg,
        cfg: &tc,
        nli: None,
        resume: Some(ResumeState {
            params,
            adam,
            next_epoch: 0,
        }),
    }
    .run(&Serial, &mut NoopObserver)
    .err()
    .unwrap();
    assert!(matches!(
        err,
        glotvec_core::Error::NonFiniteLoss { .. } | glotvec_core::Error::NonFiniteGradient
    ));
}

#[test]
fn resume_continues_epoch_numbering() {
    let (cfg, corpora, _) = toy_setup(10, 8);
    let mut tc = TrainConfig::new(["enc", "rev"], 5);
    tc.epochs = 3;
    tc.max_tokens_per_batch = 64;

    let full = TrainSession::<f32> {
        corpora: &corpora,
        model_cfg: &cfg,
        cfg: &tc,
        nli: None,
        resume: None,
    }
    .run(&Serial, &mut NoopObserver)
    .unwrap();

    // stop after 2 epochs, then resume for the third
    let mut tc_short = tc.clone();
    tc_short.epochs = 2;
    let partial = TrainSession::<f32> {
        corpora: &corpora,
        model_cfg: &cfg,
        cfg: &tc_short,
        nli: None,
        resume: None,
    }
    .run(&Serial, &mut NoopObserver)
    .unwrap();
    let resumed = TrainSession::<f32> {
        corpora: &corpora,
        model_cfg: &cfg,
        cfg: &tc,
        nli: None,
        resume: Some(ResumeState {
            params: partial.params,
            adam: partial.adam,
            next_epoch: partial.next_epoch,
        }),
    }
    .run(&Serial, &mut NoopObserver)
    .unwrap();

    assert_eq!(resumed.next_epoch, 3);
    let epochs: Vec<usize> = resumed.log.iter().map(|r| r.epoch).collect();
    assert!(epochs.iter().all(|&e| e == 2));
    // a fresh run and a resumed run agree bit-for-bit
    assert_eq!(full.params, resumed.params);
}
