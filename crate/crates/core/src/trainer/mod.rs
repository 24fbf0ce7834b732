//! Multilingual seq2seq training: two pivot target languages, round-robin
//! alternation over language combinations, token-budget batching, epoch
//! checkpoints and an optional jointly-trained NLI objective.
//!
//! Determinism contract: with a fixed seed the whole run is a pure function
//! of its inputs. Batch composition, parameter init and dropout all draw
//! from tagged RNG streams, and per-sequence gradients are reduced in fixed
//! chunks of [`TrainConfig::chunk_size`], so results are bit-identical no
//! matter how many workers the executor uses.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::executor::Executor;
use crate::heads::{pair_features, pair_features_backward, MlpHead};
use crate::model::{
    decoder_backward, decoder_forward, encode_backward, encode_one, ModelConfig, ModelParams,
};
use crate::ops::softmax_cross_entropy;
use crate::rng::SplitRng;
use crate::tensor::{Scalar, Tensor};

/// One aligned corpus, already tokenized, BPE-encoded and framed
/// `[BOS, ..., EOS]` on both sides.
#[derive(Debug, Clone)]
pub struct EncodedCorpus {
    pub src_lang: String,
    pub tgt_lang: String,
    pub pairs: Vec<(Vec<u32>, Vec<u32>)>,
}

/// Tokenizes, BPE-encodes and frames a text bitext.
pub fn encode_corpus(
    bitext: &crate::text::BitextCorpus,
    bpe: &crate::bpe::BpeModel,
) -> EncodedCorpus {
    use crate::bpe::{apply_bpe, frame};
    use crate::text::normalize_and_tokenize;
    let pairs = bitext
        .pairs
        .iter()
        .map(|(s, t)| {
            (
                frame(&apply_bpe(&normalize_and_tokenize(s.text()), bpe)),
                frame(&apply_bpe(&normalize_and_tokenize(t.text()), bpe)),
            )
        })
        .collect();
    EncodedCorpus {
        src_lang: bitext.src_lang.clone(),
        tgt_lang: bitext.tgt_lang.clone(),
        pairs,
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Exactly two pivot languages every corpus translates into.
    pub target_langs: [String; 2],
    pub lr: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub max_tokens_per_batch: usize,
    pub seed: u64,
    /// Weight of the auxiliary NLI objective; 0 disables it entirely.
    pub nli_weight: f64,
    /// Gradient clipping threshold (global norm).
    pub clip_norm: f64,
    /// Sequences per gradient-reduction chunk; fixed so thread count cannot
    /// change the floating-point summation order.
    pub chunk_size: usize,
}

impl TrainConfig {
    pub fn new(target_langs: [&str; 2], seed: u64) -> Self {
        TrainConfig {
            target_langs: [target_langs[0].to_string(), target_langs[1].to_string()],
            lr: 0.001,
            dropout: 0.1,
            epochs: 17,
            max_tokens_per_batch: 4000,
            seed,
            nli_weight: 0.0,
            clip_norm: 5.0,
            chunk_size: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_langs[0] == self.target_langs[1] {
            return Err(Error::Invalid(
                "the two target languages must be distinct".to_string(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be at least 1".to_string()));
        }
        if self.lr <= 0.0 {
            return Err(Error::Invalid("learning rate must be positive".to_string()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Invalid("dropout must be in [0, 1)".to_string()));
        }
        if self.max_tokens_per_batch == 0 || self.chunk_size == 0 {
            return Err(Error::Invalid(
                "max_tokens_per_batch and chunk_size must be positive".to_string(),
            ));
        }
        if self.nli_weight < 0.0 {
            return Err(Error::Invalid("nli_weight must be non-negative".to_string()));
        }
        Ok(())
    }
}

/// One (corpus, direction) task of the per-epoch cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub corpus: usize,
    pub src_lang: String,
    pub tgt_lang: String,
}

impl Task {
    pub fn name(&self) -> String {
        format!("{}-{}", self.src_lang, self.tgt_lang)
    }
}

/// Deterministic cycle over every available language combination, ordered
/// lexicographically by `(src_lang, tgt_lang)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub tasks: Vec<Task>,
}

/// Builds the per-epoch task cycle.
///
/// Rejects corpora targeting a non-pivot language, auto-encoding corpora
/// (source equals target) and duplicate combinations; both pivots must be
/// covered by at least one corpus.
pub fn build_schedule(corpora: &[EncodedCorpus], cfg: &TrainConfig) -> Result<Schedule> {
    if corpora.is_empty() {
        return Err(Error::Invalid("no training corpora".to_string()));
    }
    let mut tasks: Vec<Task> = Vec::with_capacity(corpora.len());
    for (i, c) in corpora.iter().enumerate() {
        if !cfg.target_langs.contains(&c.tgt_lang) {
            return Err(Error::NonPivotTarget {
                lang: c.tgt_lang.clone(),
            });
        }
        if c.src_lang == c.tgt_lang {
            return Err(Error::AutoEncodingPair {
                lang: c.src_lang.clone(),
            });
        }
        if c.pairs.is_empty() {
            return Err(Error::Invalid(format!(
                "corpus {}-{} is empty",
                c.src_lang, c.tgt_lang
            )));
        }
        if tasks
            .iter()
            .any(|t| t.src_lang == c.src_lang && t.tgt_lang == c.tgt_lang)
        {
            return Err(Error::Invalid(format!(
                "duplicate corpus for combination {}-{}",
                c.src_lang, c.tgt_lang
            )));
        }
        tasks.push(Task {
            corpus: i,
            src_lang: c.src_lang.clone(),
            tgt_lang: c.tgt_lang.clone(),
        });
    }
    for pivot in &cfg.target_langs {
        if !tasks.iter().any(|t| &t.tgt_lang == pivot) {
            return Err(Error::Invalid(format!(
                "no corpus targets pivot language '{pivot}'"
            )));
        }
    }
    tasks.sort_by(|a, b| {
        (a.src_lang.as_str(), a.tgt_lang.as_str()).cmp(&(b.src_lang.as_str(), b.tgt_lang.as_str()))
    });
    Ok(Schedule { tasks })
}

/// Splits a corpus into batches of pair indices under a token budget.
///
/// Pairs are bucketed by framed target length, shuffled inside each bucket,
/// greedily packed so `batch size x max framed length <= max_tokens` holds on
/// both sides, and the batch order is shuffled. Every pair appears exactly
/// once; identical seeds give identical batches.
pub fn make_batches(
    corpus: &EncodedCorpus,
    max_tokens: usize,
    rng: &mut SplitRng,
) -> Result<Vec<Vec<usize>>> {
    for (i, (src, tgt)) in corpus.pairs.iter().enumerate() {
        let len = src.len().max(tgt.len());
        if len > max_tokens {
            return Err(Error::OversizedPair {
                index: i,
                len,
                max: max_tokens,
            });
        }
    }

    let mut buckets: alloc::collections::BTreeMap<usize, Vec<usize>> =
        alloc::collections::BTreeMap::new();
    for (i, (_, tgt)) in corpus.pairs.iter().enumerate() {
        buckets.entry(tgt.len()).or_default().push(i);
    }
    let mut order: Vec<usize> = Vec::with_capacity(corpus.pairs.len());
    for bucket in buckets.values_mut() {
        rng.shuffle(bucket);
        order.extend_from_slice(bucket);
    }

    let mut batches: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let (mut max_src, mut max_tgt) = (0usize, 0usize);
    for i in order {
        let (s, t) = (corpus.pairs[i].0.len(), corpus.pairs[i].1.len());
        let ns = max_src.max(s);
        let nt = max_tgt.max(t);
        let n = current.len() + 1;
        if !current.is_empty() && (n * ns > max_tokens || n * nt > max_tokens) {
            batches.push(core::mem::take(&mut current));
            max_src = 0;
            max_tgt = 0;
        }
        max_src = max_src.max(s);
        max_tgt = max_tgt.max(t);
        current.push(i);
    }
    if !current.is_empty() {
        batches.push(current);
    }
    rng.shuffle(&mut batches);
    Ok(batches)
}

/// One line of the training log: `epoch task loss tokens wallclock`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub epoch: usize,
    pub task: String,
    pub loss: f64,
    pub tokens: usize,
    pub wallclock_ms: u64,
}

/// Hook for checkpointing and wallclock, implemented by the std front end.
pub trait TrainObserver<T: Scalar> {
    /// Milliseconds since some fixed origin; the default clockless
    /// implementation returns 0.
    fn now_millis(&mut self) -> u64 {
        0
    }

    /// Called after each completed epoch with the current state.
    fn on_epoch_end(
        &mut self,
        _epoch: usize,
        _params: &ModelParams<T>,
        _adam: &AdamState<T>,
        _log: &[LogRecord],
    ) {
    }
}

/// Observer that does nothing; used by tests and library callers.
pub struct NoopObserver;
impl<T: Scalar> TrainObserver<T> for NoopObserver {}

/// Labeled premise/hypothesis pairs for the auxiliary NLI objective,
/// BPE-encoded and framed like corpus sentences.
#[derive(Debug, Clone)]
pub struct NliData {
    pub pairs: Vec<(Vec<u32>, Vec<u32>, u32)>,
    pub classes: usize,
    pub hidden_sizes: Vec<usize>,
    pub batch_size: usize,
}

/// Everything `train` produced.
pub struct TrainOutcome<T> {
    pub params: ModelParams<T>,
    pub adam: AdamState<T>,
    pub nli_head: Option<MlpHead<T>>,
    pub log: Vec<LogRecord>,
    pub next_epoch: usize,
}

/// State to continue from (checkpoint resume).
pub struct ResumeState<T> {
    pub params: ModelParams<T>,
    pub adam: AdamState<T>,
    pub next_epoch: usize,
}

/// A prepared training run.
pub struct TrainSession<'a, T: Scalar> {
    pub corpora: &'a [EncodedCorpus],
    pub model_cfg: &'a ModelConfig,
    pub cfg: &'a TrainConfig,
    pub nli: Option<&'a NliData>,
    pub resume: Option<ResumeState<T>>,
}

struct ChunkResult<T> {
    grads: ModelParams<T>,
    loss_sum: T,
    positions: usize,
}

impl<'a, T: Scalar> TrainSession<'a, T> {
    /// Runs the remaining epochs. Aborts with [`Error::NonFiniteLoss`] if a
    /// step produces NaN or infinity; checkpoints already handed to the
    /// observer stay valid in that case.
    pub fn run<E: Executor, O: TrainObserver<T>>(
        mut self,
        exec: &E,
        obs: &mut O,
    ) -> Result<TrainOutcome<T>> {
        self.cfg.validate()?;
        self.model_cfg.validate()?;
        let schedule = build_schedule(self.corpora, self.cfg)?;
        for task in &schedule.tasks {
            // every language must exist in the decoder's table
            self.model_cfg.lang_id(&task.tgt_lang)?;
        }
        if self.cfg.nli_weight > 0.0 && self.nli.is_none() {
            return Err(Error::Invalid(
                "nli_weight > 0 requires NLI data".to_string(),
            ));
        }

        let seed = self.cfg.seed;
        let resume = self.resume.take();
        let (mut params, mut adam, start_epoch) = match resume {
            Some(state) => (state.params, state.adam, state.next_epoch),
            None => {
                let mut rng = SplitRng::from_tags(seed, [0, 0, 0]);
                let params = ModelParams::<T>::init(self.model_cfg, &mut rng);
                let adam = AdamState::new(&named_refs(&params));
                (params, adam, 0)
            }
        };
        if start_epoch >= self.cfg.epochs {
            return Err(Error::Invalid(format!(
                "resume epoch {start_epoch} is not before configured total {}",
                self.cfg.epochs
            )));
        }
        params.validate_shapes(self.model_cfg)?;

        let use_nli = self.cfg.nli_weight > 0.0;
        let mut nli_head: Option<MlpHead<T>> = None;
        let mut nli_adam: Option<AdamState<T>> = None;
        if use_nli {
            let data = self.nli.unwrap();
            if data.pairs.is_empty() || data.classes < 2 {
                return Err(Error::Invalid("NLI data is empty or degenerate".to_string()));
            }
            let mut sizes = vec![4 * self.model_cfg.sent_dim()];
            sizes.extend_from_slice(&data.hidden_sizes);
            sizes.push(data.classes);
            let mut rng = SplitRng::from_tags(seed, [3, 0, 0]);
            let head = MlpHead::init(&sizes, &mut rng)?;
            nli_adam = Some(AdamState::new(&head.tensors()));
            nli_head = Some(head);
        }

        let lr = T::from_f64_lossy(self.cfg.lr);
        let mut log: Vec<LogRecord> = Vec::new();

        for epoch in start_epoch..self.cfg.epochs {
            // within-epoch step counter: RNG tags stay stable across resume
            let mut epoch_step: u64 = 0;
            let mut queues: Vec<VecDeque<Vec<usize>>> = Vec::with_capacity(self.corpora.len());
            for (ci, corpus) in self.corpora.iter().enumerate() {
                let mut rng = SplitRng::from_tags(seed, [1, epoch as u64, ci as u64]);
                queues.push(
                    make_batches(corpus, self.cfg.max_tokens_per_batch, &mut rng)?
                        .into_iter()
                        .collect(),
                );
            }

            let mut task_loss = vec![0.0f64; schedule.tasks.len()];
            let mut task_batches = vec![0usize; schedule.tasks.len()];
            let mut task_tokens = vec![0usize; schedule.tasks.len()];

            while queues.iter().any(|q| !q.is_empty()) {
                for (ti, task) in schedule.tasks.iter().enumerate() {
                    let Some(batch) = queues[task.corpus].pop_front() else {
                        continue;
                    };
                    epoch_step += 1;
                    let corpus = &self.corpora[task.corpus];
                    let lang_id = self.model_cfg.lang_id(&task.tgt_lang)?;

                    let (mut grads, loss, positions) = self.seq2seq_grads(
                        &params,
                        corpus,
                        &batch,
                        lang_id,
                        seed,
                        epoch,
                        epoch_step,
                        exec,
                    )?;

                    let mut step_loss = loss;
                    let mut head_grads: Option<MlpHead<T>> = None;
                    if use_nli {
                        let head = nli_head.as_ref().unwrap();
                        let data = self.nli.unwrap();
                        let (nli_loss, hg) = self.nli_grads(
                            &params,
                            head,
                            data,
                            &mut grads,
                            seed,
                            epoch,
                            epoch_step,
                        )?;
                        step_loss += self.cfg.nli_weight * nli_loss;
                        head_grads = Some(hg);
                    }

                    if !step_loss.is_finite() {
                        return Err(Error::NonFiniteLoss {
                            epoch,
                            task: task.name(),
                        });
                    }

                    clip_jointly(
                        &mut grads,
                        head_grads.as_mut(),
                        T::from_f64_lossy(self.cfg.clip_norm),
                    );

                    {
                        let grad_refs = named_refs(&grads);
                        let mut param_refs: Vec<&mut Tensor<T>> =
                            params.tensors_mut().into_iter().map(|(_, t)| t).collect();
                        adam.step(&mut param_refs, &grad_refs, lr)?;
                    }
                    if let (Some(head), Some(hg), Some(ha)) =
                        (nli_head.as_mut(), head_grads.as_ref(), nli_adam.as_mut())
                    {
                        let grad_refs: Vec<&Tensor<T>> = hg.tensors();
                        let mut param_refs = head.tensors_mut();
                        ha.step(&mut param_refs, &grad_refs, lr)?;
                    }

                    task_loss[ti] += step_loss;
                    task_batches[ti] += 1;
                    task_tokens[ti] += positions;
                }
            }

            for (ti, task) in schedule.tasks.iter().enumerate() {
                log.push(LogRecord {
                    epoch,
                    task: task.name(),
                    loss: if task_batches[ti] > 0 {
                        task_loss[ti] / task_batches[ti] as f64
                    } else {
                        f64::NAN
                    },
                    tokens: task_tokens[ti],
                    wallclock_ms: obs.now_millis(),
                });
            }
            obs.on_epoch_end(epoch, &params, &adam, &log);
        }

        Ok(TrainOutcome {
            params,
            adam,
            nli_head,
            log,
            next_epoch: self.cfg.epochs,
        })
    }

    /// Per-batch seq2seq gradients, reduced over fixed-size chunks of
    /// sequences so the summation order never depends on the executor.
    #[allow(clippy::too_many_arguments)]
    fn seq2seq_grads<E: Executor>(
        &self,
        params: &ModelParams<T>,
        corpus: &EncodedCorpus,
        batch: &[usize],
        lang_id: usize,
        seed: u64,
        epoch: usize,
        step: u64,
        exec: &E,
    ) -> Result<(ModelParams<T>, f64, usize)> {
        let mut step_rng = SplitRng::from_tags(seed, [2, epoch as u64, step]);
        let seq_rngs: Vec<SplitRng> = (0..batch.len()).map(|_| step_rng.split()).collect();

        let chunk = self.cfg.chunk_size;
        let n_chunks = batch.len().div_ceil(chunk);
        let dropout = self.cfg.dropout;
        let model_cfg = self.model_cfg;

        let results: Vec<Result<ChunkResult<T>>> = exec.map(n_chunks, |c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(batch.len());
            let mut grads = ModelParams::<T>::zeros(model_cfg);
            let mut loss_sum = T::zero();
            let mut positions = 0usize;
            for bi in lo..hi {
                let (src, tgt) = &corpus.pairs[batch[bi]];
                let mut rng = seq_rngs[bi].clone();
                let (e, enc_cache) = encode_one(params, model_cfg, src, dropout, &mut rng)?;
                let (l, dec_cache) =
                    decoder_forward(params, model_cfg, &e, tgt, lang_id, dropout, &mut rng)?;
                loss_sum = loss_sum + l;
                positions += dec_cache.positions;
                let d_e = decoder_backward(params, model_cfg, &dec_cache, &mut grads);
                encode_backward(params, model_cfg, &enc_cache, &d_e, &mut grads);
            }
            Ok(ChunkResult {
                grads,
                loss_sum,
                positions,
            })
        });

        let mut grads = ModelParams::<T>::zeros(model_cfg);
        let mut loss_sum = T::zero();
        let mut positions = 0usize;
        for r in results {
            let r = r?;
            grads.add_assign(&r.grads);
            loss_sum = loss_sum + r.loss_sum;
            positions += r.positions;
        }
        if positions == 0 {
            return Err(Error::NoScoredRows);
        }
        let inv = T::one() / T::from_f64_lossy(positions as f64);
        grads.scale(inv);
        let loss = (loss_sum * inv).to_f64().unwrap_or(f64::NAN);
        Ok((grads, loss, positions))
    }

    /// Gradients of the weighted NLI objective; encoder gradients accumulate
    /// into `grads`, head gradients are returned. Runs serially: NLI batches
    /// are small.
    #[allow(clippy::too_many_arguments)]
    fn nli_grads(
        &self,
        params: &ModelParams<T>,
        head: &MlpHead<T>,
        data: &NliData,
        grads: &mut ModelParams<T>,
        seed: u64,
        epoch: usize,
        step: u64,
    ) -> Result<(f64, MlpHead<T>)> {
        let mut rng = SplitRng::from_tags(seed, [4, epoch as u64, step]);
        let n = data.batch_size.max(1).min(data.pairs.len());
        let picks: Vec<usize> = (0..n).map(|_| rng.index(data.pairs.len())).collect();
        let lambda = T::from_f64_lossy(self.cfg.nli_weight);
        let dropout = self.cfg.dropout;

        let mut enc_caches = Vec::with_capacity(n);
        let mut feats = Vec::with_capacity(n);
        let mut logit_rows = Vec::with_capacity(n);
        let mut head_caches = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for &i in &picks {
            let (p_ids, h_ids, label) = &data.pairs[i];
            let (pe, pc) = encode_one(params, self.model_cfg, p_ids, dropout, &mut rng)?;
            let (he, hc) = encode_one(params, self.model_cfg, h_ids, dropout, &mut rng)?;
            let f = pair_features(&pe, &he)?;
            let (logits, cache) = head.forward(&f)?;
            enc_caches.push((pe, pc, he, hc));
            feats.push(f);
            logit_rows.push(logits);
            head_caches.push(cache);
            targets.push(*label);
        }
        let (mean_loss, mut d_rows) = softmax_cross_entropy(&logit_rows, &targets, u32::MAX)?;
        for row in &mut d_rows {
            for v in row {
                *v = *v * lambda;
            }
        }

        let mut head_grads = head.zeros_like();
        for (k, cache) in head_caches.iter().enumerate() {
            let d_feat = head.backward(cache, &d_rows[k], &mut head_grads);
            let (pe, pc, he, hc) = &enc_caches[k];
            let (dp, dh) = pair_features_backward(pe, he, &d_feat);
            encode_backward(params, self.model_cfg, pc, &dp, grads);
            encode_backward(params, self.model_cfg, hc, &dh, grads);
        }
        Ok((mean_loss.to_f64().unwrap_or(f64::NAN), head_grads))
    }
}

fn named_refs<T: Scalar>(p: &ModelParams<T>) -> Vec<&Tensor<T>> {
    p.tensors().into_iter().map(|(_, t)| t).collect()
}

/// Clips the model gradient (and the NLI head gradient when present) to a
/// joint global norm.
fn clip_jointly<T: Scalar>(
    grads: &mut ModelParams<T>,
    head_grads: Option<&mut MlpHead<T>>,
    max_norm: T,
) {
    let mut sq = T::zero();
    for (_, t) in grads.tensors() {
        for &v in t.data() {
            sq = sq + v * v;
        }
    }
    if let Some(h) = &head_grads {
        for t in h.tensors() {
            for &v in t.data() {
                sq = sq + v * v;
            }
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.scale(s);
        if let Some(h) = head_grads {
            for t in h.tensors_mut() {
                t.scale(s);
            }
        }
    }
}
