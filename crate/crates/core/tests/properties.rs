//! Property tests for the text pipeline, BPE and the numeric kernels.

use proptest::prelude::*;

use glotvec_core::bpe::{apply_bpe, decode_ids, learn_bpe};
use glotvec_core::gradcheck::{central_diff_grad, rel_error};
use glotvec_core::lstm::LstmCellParams;
use glotvec_core::ops::maxpool_time;
use glotvec_core::tensor::Tensor;
use glotvec_core::text::{filter_test_corpus, normalize_and_tokenize, Sentence};
use glotvec_core::SplitRng;

proptest! {
    #[test]
    fn tokenizer_is_idempotent_on_its_own_output(raw in "\\PC{0,60}") {
        let once = normalize_and_tokenize(&raw);
        let again = normalize_and_tokenize(&once.join(" "));
        prop_assert_eq!(once, again);
    }

    #[test]
    fn tokens_never_contain_whitespace(raw in "\\PC{0,60}") {
        for tok in normalize_and_tokenize(&raw) {
            prop_assert!(!tok.is_empty());
            prop_assert!(!tok.chars().any(char::is_whitespace), "token {tok:?}");
        }
    }

    #[test]
    fn filter_shrinks_and_is_idempotent(
        texts in proptest::collection::vec(("[a-d ]{0,12}", "[e-h ]{0,12}"), 0..12)
    ) {
        let pairs: Vec<(Sentence, Sentence)> = texts
            .iter()
            .filter(|(a, b)| !a.trim().is_empty() && !b.trim().is_empty())
            .map(|(a, b)| {
                (
                    Sentence::new(a, "en").unwrap(),
                    Sentence::new(b, "xx").unwrap(),
                )
            })
            .collect();
        let once = filter_test_corpus(&pairs);
        prop_assert!(once.len() <= pairs.len());
        let twice = filter_test_corpus(&once);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn bpe_roundtrips_sentences_over_trained_words(
        words in proptest::collection::vec("[a-f]{1,6}", 1..10),
        picks in proptest::collection::vec(0usize..10, 1..8),
        merges in 1usize..30
    ) {
        let corpus = vec![words.clone()];
        let model = learn_bpe(&corpus, merges).unwrap();
        let sentence: Vec<String> = picks
            .iter()
            .map(|&i| words[i % words.len()].clone())
            .collect();
        let ids = apply_bpe(&sentence, &model);
        let decoded = decode_ids(&ids, &model).unwrap();
        prop_assert_eq!(decoded, sentence.join(" "));
    }

    #[test]
    fn maxpool_is_invariant_under_masked_padding(
        rows in proptest::collection::vec(
            proptest::collection::vec(-10.0f64..10.0, 4), 1..6),
        pad in 0usize..4
    ) {
        let mask = vec![true; rows.len()];
        let (a, _) = maxpool_time(&rows, &mask).unwrap();
        let mut padded = rows.clone();
        let mut padded_mask = mask.clone();
        for _ in 0..pad {
            padded.push(vec![1e9; 4]);
            padded_mask.push(false);
        }
        let (b, _) = maxpool_time(&padded, &padded_mask).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn lstm_cell_backward_matches_oracle_on_random_shapes(
        seed in 0u64..1000,
        input in 1usize..5,
        hidden in 1usize..5
    ) {
        let mut rng = SplitRng::seed_from(seed);
        let mut cell = LstmCellParams::<f64>::zeros(input, hidden);
        for t in [&mut cell.w, &mut cell.u, &mut cell.b] {
            for v in t.data_mut() {
                *v = rng.range_f64(-0.8, 0.8);
            }
        }
        let x: Vec<f64> = (0..input).map(|_| rng.range_f64(-1.0, 1.0)).collect();
        let h0: Vec<f64> = (0..hidden).map(|_| rng.range_f64(-1.0, 1.0)).collect();
        let c0: Vec<f64> = (0..hidden).map(|_| rng.range_f64(-1.0, 1.0)).collect();

        let (_, _, cache) = cell.forward(&x, &h0, &c0).unwrap();
        let mut grads = LstmCellParams::<f64>::zeros(input, hidden);
        let dh = vec![1.0; hidden];
        let dc = vec![0.5; hidden];
        cell.backward(&cache, &dh, &dc, &mut grads);

        // check the W block only; the cell test suite covers the rest
        let w0 = cell.w.data().to_vec();
        let loss = |wd: &[f64]| {
            let c2 = LstmCellParams {
                w: Tensor::from_vec(&[4 * hidden, input], wd.to_vec()).unwrap(),
                u: cell.u.clone(),
                b: cell.b.clone(),
            };
            let (h, c, _) = c2.forward(&x, &h0, &c0).unwrap();
            h.iter().sum::<f64>() + 0.5 * c.iter().sum::<f64>()
        };
        let numeric = central_diff_grad(loss, &w0, 1e-5);
        for (n, a) in numeric.iter().zip(grads.w.data().iter()) {
            prop_assert!(rel_error(*n, *a) < 1e-4, "{n} vs {a}");
        }
    }
}
