//! The sentence-embedding encoder and its auxiliary translation decoder.
//!
//! The encoder is a stacked BiLSTM over shared subword embeddings; a
//! sentence embedding is the componentwise max over time of the final
//! layer's concatenated bidirectional outputs, so its dimension is twice the
//! per-direction hidden size. The decoder is a single LSTM initialized from
//! the sentence embedding through tanh-squashed linear maps; at every step
//! its input is the concatenation of token embedding, sentence embedding and
//! a language ID embedding. There is no attention and no other
//! encoder/decoder connection, and no language information ever reaches the
//! encoder: [`encode_one`] has no language parameter at all.

mod decoder;
mod encoder;

pub use decoder::{
    decoder_backward, decoder_forward, decoder_init, greedy_decode, teacher_forced_loss,
    DecoderCache,
};
pub use encoder::{encode_backward, encode_batch, encode_masked, encode_one, EncoderCache};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lstm::{init_uniform, LstmCellParams};
use crate::rng::SplitRng;
use crate::tensor::{Scalar, Tensor};

/// Model dimensions and the language table.
///
/// `langs` holds every language the decoder can generate, sorted; a
/// language's id is its position in this list. The encoder never consults it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub emb_dim: usize,
    pub hidden: usize,
    pub depth: usize,
    pub dec_hidden: usize,
    pub lang_emb_dim: usize,
    pub langs: Vec<String>,
}

impl ModelConfig {
    /// Paper-scale defaults: embeddings 320, hidden 512 per direction,
    /// decoder 2048, language embedding 32, one layer.
    pub fn new(vocab_size: usize, langs: &[&str]) -> Self {
        let mut langs: Vec<String> = langs.iter().map(|s| s.to_string()).collect();
        langs.sort();
        langs.dedup();
        ModelConfig {
            vocab_size,
            emb_dim: 320,
            hidden: 512,
            depth: 1,
            dec_hidden: 2048,
            lang_emb_dim: 32,
            langs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.depth) {
            return Err(Error::Invalid(format!(
                "depth must be in [1,5], got {}",
                self.depth
            )));
        }
        if self.vocab_size == 0 || self.emb_dim == 0 || self.hidden == 0 || self.dec_hidden == 0 {
            return Err(Error::Invalid(
                "model dimensions must be positive".to_string(),
            ));
        }
        if self.lang_emb_dim == 0 {
            return Err(Error::Invalid("lang_emb_dim must be positive".to_string()));
        }
        if self.langs.is_empty() {
            return Err(Error::Invalid("language table is empty".to_string()));
        }
        Ok(())
    }

    /// Dimension of a sentence embedding: both directions concatenated.
    pub fn sent_dim(&self) -> usize {
        2 * self.hidden
    }

    /// Decoder input width: token embedding + sentence embedding + language
    /// embedding.
    pub fn dec_input_dim(&self) -> usize {
        self.emb_dim + self.sent_dim() + self.lang_emb_dim
    }

    pub fn lang_id(&self, tag: &str) -> Result<usize> {
        self.langs
            .iter()
            .position(|l| l == tag)
            .ok_or_else(|| Error::UnknownLanguage {
                lang: tag.to_string(),
                known: self.langs.clone(),
            })
    }
}

/// Both directions of one stacked layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmParams<T> {
    pub fwd: LstmCellParams<T>,
    pub bwd: LstmCellParams<T>,
}

/// Every weight tensor of the system, in one serializable container.
///
/// The same struct doubles as the gradient accumulator: gradients have the
/// shape of their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub enc_embed: Tensor<T>, // vocab x emb_dim
    pub enc_layers: Vec<BiLstmParams<T>>,
    pub dec_embed: Tensor<T>, // vocab x emb_dim
    pub dec_cell: LstmCellParams<T>,
    pub init_h_w: Tensor<T>, // dec_hidden x sent_dim
    pub init_h_b: Tensor<T>, // dec_hidden
    pub init_c_w: Tensor<T>,
    pub init_c_b: Tensor<T>,
    pub out_w: Tensor<T>,      // vocab x dec_hidden
    pub out_b: Tensor<T>,      // vocab
    pub lang_embed: Tensor<T>, // n_langs x lang_emb_dim
}

impl<T: Scalar> ModelParams<T> {
    /// All-zero parameters with shapes from `cfg` (gradient buffers).
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let layer_input = |i: usize| if i == 0 { cfg.emb_dim } else { cfg.sent_dim() };
        ModelParams {
            enc_embed: Tensor::zeros(&[cfg.vocab_size, cfg.emb_dim]),
            enc_layers: (0..cfg.depth)
                .map(|i| BiLstmParams {
                    fwd: LstmCellParams::zeros(layer_input(i), cfg.hidden),
                    bwd: LstmCellParams::zeros(layer_input(i), cfg.hidden),
                })
                .collect(),
            dec_embed: Tensor::zeros(&[cfg.vocab_size, cfg.emb_dim]),
            dec_cell: LstmCellParams::zeros(cfg.dec_input_dim(), cfg.dec_hidden),
            init_h_w: Tensor::zeros(&[cfg.dec_hidden, cfg.sent_dim()]),
            init_h_b: Tensor::zeros(&[cfg.dec_hidden]),
            init_c_w: Tensor::zeros(&[cfg.dec_hidden, cfg.sent_dim()]),
            init_c_b: Tensor::zeros(&[cfg.dec_hidden]),
            out_w: Tensor::zeros(&[cfg.vocab_size, cfg.dec_hidden]),
            out_b: Tensor::zeros(&[cfg.vocab_size]),
            lang_embed: Tensor::zeros(&[cfg.langs.len(), cfg.lang_emb_dim]),
        }
    }

    /// Random initialization: weights uniform in +-1/sqrt(fan-in), forget
    /// gate biases 1, everything else 0. The draw order is fixed, so a seed
    /// pins the whole parameter set.
    pub fn init(cfg: &ModelConfig, rng: &mut SplitRng) -> Self {
        let mut p = Self::zeros(cfg);
        init_uniform(&mut p.enc_embed, cfg.emb_dim, rng);
        let layer_input = |i: usize| if i == 0 { cfg.emb_dim } else { cfg.sent_dim() };
        for i in 0..cfg.depth {
            p.enc_layers[i].fwd = LstmCellParams::init(layer_input(i), cfg.hidden, rng);
            p.enc_layers[i].bwd = LstmCellParams::init(layer_input(i), cfg.hidden, rng);
        }
        init_uniform(&mut p.dec_embed, cfg.emb_dim, rng);
        p.dec_cell = LstmCellParams::init(cfg.dec_input_dim(), cfg.dec_hidden, rng);
        init_uniform(&mut p.init_h_w, cfg.sent_dim(), rng);
        init_uniform(&mut p.init_c_w, cfg.sent_dim(), rng);
        init_uniform(&mut p.out_w, cfg.dec_hidden, rng);
        init_uniform(&mut p.lang_embed, cfg.lang_emb_dim, rng);
        p
    }

    /// Named tensors in a fixed order shared by serialization, the optimizer
    /// and the gradient-check flattening.
    pub fn tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out: Vec<(String, &Tensor<T>)> = Vec::new();
        out.push(("enc_embed".to_string(), &self.enc_embed));
        for (i, layer) in self.enc_layers.iter().enumerate() {
            out.push((format!("enc.l{i}.fwd.w"), &layer.fwd.w));
            out.push((format!("enc.l{i}.fwd.u"), &layer.fwd.u));
            out.push((format!("enc.l{i}.fwd.b"), &layer.fwd.b));
            out.push((format!("enc.l{i}.bwd.w"), &layer.bwd.w));
            out.push((format!("enc.l{i}.bwd.u"), &layer.bwd.u));
            out.push((format!("enc.l{i}.bwd.b"), &layer.bwd.b));
        }
        out.push(("dec_embed".to_string(), &self.dec_embed));
        out.push(("dec.w".to_string(), &self.dec_cell.w));
        out.push(("dec.u".to_string(), &self.dec_cell.u));
        out.push(("dec.b".to_string(), &self.dec_cell.b));
        out.push(("init_h.w".to_string(), &self.init_h_w));
        out.push(("init_h.b".to_string(), &self.init_h_b));
        out.push(("init_c.w".to_string(), &self.init_c_w));
        out.push(("init_c.b".to_string(), &self.init_c_b));
        out.push(("out.w".to_string(), &self.out_w));
        out.push(("out.b".to_string(), &self.out_b));
        out.push(("lang_embed".to_string(), &self.lang_embed));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out: Vec<(String, &mut Tensor<T>)> = Vec::new();
        out.push(("enc_embed".to_string(), &mut self.enc_embed));
        for (i, layer) in self.enc_layers.iter_mut().enumerate() {
            out.push((format!("enc.l{i}.fwd.w"), &mut layer.fwd.w));
            out.push((format!("enc.l{i}.fwd.u"), &mut layer.fwd.u));
            out.push((format!("enc.l{i}.fwd.b"), &mut layer.fwd.b));
            out.push((format!("enc.l{i}.bwd.w"), &mut layer.bwd.w));
            out.push((format!("enc.l{i}.bwd.u"), &mut layer.bwd.u));
            out.push((format!("enc.l{i}.bwd.b"), &mut layer.bwd.b));
        }
        out.push(("dec_embed".to_string(), &mut self.dec_embed));
        out.push(("dec.w".to_string(), &mut self.dec_cell.w));
        out.push(("dec.u".to_string(), &mut self.dec_cell.u));
        out.push(("dec.b".to_string(), &mut self.dec_cell.b));
        out.push(("init_h.w".to_string(), &mut self.init_h_w));
        out.push(("init_h.b".to_string(), &mut self.init_h_b));
        out.push(("init_c.w".to_string(), &mut self.init_c_w));
        out.push(("init_c.b".to_string(), &mut self.init_c_b));
        out.push(("out.w".to_string(), &mut self.out_w));
        out.push(("out.b".to_string(), &mut self.out_b));
        out.push(("lang_embed".to_string(), &mut self.lang_embed));
        out
    }

    /// `self += other`, elementwise across every tensor.
    pub fn add_assign(&mut self, other: &ModelParams<T>) {
        let others = other.tensors();
        for ((_, mine), (_, theirs)) in self.tensors_mut().into_iter().zip(others) {
            mine.add_assign(theirs);
        }
    }

    pub fn scale(&mut self, s: T) {
        for (_, t) in self.tensors_mut() {
            t.scale(s);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.all_finite())
    }

    /// Euclidean norm over every element, used for gradient clipping.
    pub fn global_norm(&self) -> T {
        let mut acc = T::zero();
        for (_, t) in self.tensors() {
            for &v in t.data() {
                acc = acc + v * v;
            }
        }
        acc.sqrt()
    }

    /// Scales all tensors so the global norm is at most `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: T) {
        let norm = self.global_norm();
        if norm > max_norm {
            self.scale(max_norm / norm);
        }
    }

    pub fn flatten(&self) -> Vec<T> {
        let mut flat = Vec::new();
        for (_, t) in self.tensors() {
            flat.extend_from_slice(t.data());
        }
        flat
    }

    pub fn assign_from_flat(&mut self, flat: &[T]) {
        let mut at = 0;
        for (_, t) in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        debug_assert_eq!(at, flat.len());
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let cast_cell = |c: &LstmCellParams<T>| LstmCellParams {
            w: c.w.cast(),
            u: c.u.cast(),
            b: c.b.cast(),
        };
        ModelParams {
            enc_embed: self.enc_embed.cast(),
            enc_layers: self
                .enc_layers
                .iter()
                .map(|l| BiLstmParams {
                    fwd: cast_cell(&l.fwd),
                    bwd: cast_cell(&l.bwd),
                })
                .collect(),
            dec_embed: self.dec_embed.cast(),
            dec_cell: cast_cell(&self.dec_cell),
            init_h_w: self.init_h_w.cast(),
            init_h_b: self.init_h_b.cast(),
            init_c_w: self.init_c_w.cast(),
            init_c_b: self.init_c_b.cast(),
            out_w: self.out_w.cast(),
            out_b: self.out_b.cast(),
            lang_embed: self.lang_embed.cast(),
        }
    }

    /// Checks every tensor shape against `cfg`; checkpoint loading runs this
    /// before the parameters are used.
    pub fn validate_shapes(&self, cfg: &ModelConfig) -> Result<()> {
        let reference = Self::zeros(cfg);
        let want = reference.tensors();
        let have = self.tensors();
        if want.len() != have.len() {
            return Err(Error::DimMismatch {
                op: "checkpoint tensor count",
                expected: want.len(),
                got: have.len(),
            });
        }
        for ((name, w), (_, h)) in want.iter().zip(have.iter()) {
            if w.shape() != h.shape() {
                return Err(Error::Invalid(format!(
                    "tensor '{name}' has shape {:?}, config requires {:?}",
                    h.shape(),
                    w.shape()
                )));
            }
        }
        Ok(())
    }
}
