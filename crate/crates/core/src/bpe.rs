//! Joint byte-pair encoding shared by all languages.
//!
//! One vocabulary is learned on the concatenation of every training corpus,
//! so the encoder never receives an explicit signal about the input language.
//! Learning uses the classic greedy scheme: words are split into characters
//! followed by a separate end-of-word marker, and the most frequent adjacent
//! symbol pair is merged repeatedly. Frequencies are raw concatenated counts;
//! no per-language balancing is applied. In the final segmentation a trailing
//! marker is fused into the word's last symbol, so `low` segments to
//! `["low</w>"]` rather than `["low", "</w>"]`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// End-of-word marker appended to each word before merging.
pub const EOW: &str = "</w>";

/// Reserved special token ids.
pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;

const SPECIALS: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

/// A learned BPE model: ordered merges plus the token/id vocabulary.
///
/// The vocabulary is a pure function of `(merges, chars)` and is rebuilt
/// deterministically when a model is loaded from its file form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    chars: Vec<String>,
    ranks: BTreeMap<(String, String), u32>,
    vocab: BTreeMap<String, u32>,
    symbols: Vec<String>,
}

impl BpeModel {
    /// Rebuilds the model from its serialized parts.
    ///
    /// Ids are dense from 0: the four specials, then for each training
    /// character `c` (sorted) the symbols `c` and `c</w>`, then for each merge
    /// in priority order its result and, when the result carries no marker,
    /// the word-final form `result</w>`.
    pub fn from_parts(merges: Vec<(String, String)>, chars: Vec<String>) -> Result<Self> {
        let mut ranks = BTreeMap::new();
        for (i, m) in merges.iter().enumerate() {
            if ranks.insert(m.clone(), i as u32).is_some() {
                return Err(Error::Invalid(alloc::format!(
                    "duplicate merge '{} {}'",
                    m.0,
                    m.1
                )));
            }
        }

        let chars: Vec<String> = {
            let set: BTreeSet<String> = chars.into_iter().collect();
            set.into_iter().collect()
        };

        let mut symbols: Vec<String> = Vec::new();
        let mut vocab: BTreeMap<String, u32> = BTreeMap::new();
        let push = |sym: String, symbols: &mut Vec<String>, vocab: &mut BTreeMap<String, u32>| {
            if !vocab.contains_key(&sym) {
                vocab.insert(sym.clone(), symbols.len() as u32);
                symbols.push(sym);
            }
        };
        for s in SPECIALS {
            push(s.to_string(), &mut symbols, &mut vocab);
        }
        for c in &chars {
            push(c.clone(), &mut symbols, &mut vocab);
            push(alloc::format!("{c}{EOW}"), &mut symbols, &mut vocab);
        }
        for (l, r) in &merges {
            let merged = alloc::format!("{l}{r}");
            if !merged.contains(EOW) {
                push(alloc::format!("{merged}{EOW}"), &mut symbols, &mut vocab);
            }
            push(merged, &mut symbols, &mut vocab);
        }

        Ok(BpeModel {
            merges,
            chars,
            ranks,
            vocab,
            symbols,
        })
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn chars(&self) -> &[String] {
        &self.chars
    }

    pub fn vocab_size(&self) -> usize {
        self.symbols.len()
    }

    pub fn id(&self, symbol: &str) -> Option<u32> {
        self.vocab.get(symbol).copied()
    }

    pub fn symbol(&self, id: u32) -> Option<&str> {
        self.symbols.get(id as usize).map(|s| s.as_str())
    }

    /// Segments one token into subword symbols.
    ///
    /// The token is split into characters plus a separate end-of-word marker;
    /// merges are applied in priority order (always the lowest-rank pair
    /// present, all occurrences left to right); finally a still-separate
    /// trailing marker is fused into the preceding symbol.
    pub fn segment(&self, token: &str) -> Vec<String> {
        if token.is_empty() {
            return Vec::new();
        }
        let mut syms: Vec<String> = token.chars().map(|c| c.to_string()).collect();
        syms.push(EOW.to_string());

        loop {
            let mut best: Option<(u32, (String, String))> = None;
            for w in syms.windows(2) {
                let pair = (w[0].clone(), w[1].clone());
                if let Some(&rank) = self.ranks.get(&pair) {
                    if best.as_ref().map_or(true, |(r, _)| rank < *r) {
                        best = Some((rank, pair));
                    }
                }
            }
            let Some((_, (l, r))) = best else { break };
            let merged = alloc::format!("{l}{r}");
            let mut out = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == l && syms[i + 1] == r {
                    out.push(merged.clone());
                    i += 2;
                } else {
                    out.push(syms[i].clone());
                    i += 1;
                }
            }
            syms = out;
        }

        if syms.len() >= 2 && syms.last().map(String::as_str) == Some(EOW) {
            syms.pop();
            let last = syms.last_mut().expect("len >= 1");
            last.push_str(EOW);
        }
        syms
    }
}

/// Learns `min(num_merges, available)` greedy merges over the given corpora.
///
/// Ties between equal-frequency pairs break lexicographically on
/// `(left, right)`, so identical input always yields an identical model.
pub fn learn_bpe(corpora: &[Vec<String>], num_merges: usize) -> Result<BpeModel> {
    if num_merges == 0 {
        return Err(Error::InvalidMergeCount);
    }
    let mut word_freq: BTreeMap<String, i64> = BTreeMap::new();
    for corpus in corpora {
        for tok in corpus {
            if !tok.is_empty() {
                *word_freq.entry(tok.clone()).or_insert(0) += 1;
            }
        }
    }
    if word_freq.is_empty() {
        return Err(Error::EmptyTrainingText);
    }

    let mut chars: BTreeSet<String> = BTreeSet::new();
    let mut words: Vec<(Vec<String>, i64)> = Vec::with_capacity(word_freq.len());
    for (word, freq) in &word_freq {
        let mut syms: Vec<String> = word.chars().map(|c| c.to_string()).collect();
        for s in &syms {
            chars.insert(s.clone());
        }
        syms.push(EOW.to_string());
        words.push((syms, *freq));
    }

    type Pair = (String, String);
    let mut stats: BTreeMap<Pair, i64> = BTreeMap::new();
    let mut index: BTreeMap<Pair, BTreeSet<usize>> = BTreeMap::new();
    let count_word =
        |syms: &[String], freq: i64, sign: i64, wi: usize, stats: &mut BTreeMap<Pair, i64>, index: &mut BTreeMap<Pair, BTreeSet<usize>>| {
            for w in syms.windows(2) {
                let pair = (w[0].clone(), w[1].clone());
                *stats.entry(pair.clone()).or_insert(0) += sign * freq;
                if sign > 0 {
                    index.entry(pair).or_default().insert(wi);
                }
            }
        };
    for (wi, (syms, freq)) in words.iter().enumerate() {
        count_word(syms, *freq, 1, wi, &mut stats, &mut index);
    }

    let mut merges: Vec<Pair> = Vec::new();
    while merges.len() < num_merges {
        let mut best: Option<(&Pair, i64)> = None;
        for (pair, &count) in &stats {
            if count > 0 && best.map_or(true, |(_, c)| count > c) {
                best = Some((pair, count));
            }
        }
        let Some((pair, _)) = best else { break };
        let pair = pair.clone();
        let merged = alloc::format!("{}{}", pair.0, pair.1);

        let affected: Vec<usize> = index
            .get(&pair)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default();
        for wi in affected {
            let (syms, freq) = &words[wi];
            let freq = *freq;
            if !contains_pair(syms, &pair) {
                continue; // stale index entry from an earlier merge
            }
            let old = syms.clone();
            let mut new_syms = Vec::with_capacity(old.len());
            let mut i = 0;
            while i < old.len() {
                if i + 1 < old.len() && old[i] == pair.0 && old[i + 1] == pair.1 {
                    new_syms.push(merged.clone());
                    i += 2;
                } else {
                    new_syms.push(old[i].clone());
                    i += 1;
                }
            }
            count_word(&old, freq, -1, wi, &mut stats, &mut index);
            count_word(&new_syms, freq, 1, wi, &mut stats, &mut index);
            words[wi].0 = new_syms;
        }
        stats.remove(&pair);
        index.remove(&pair);
        merges.push(pair);
    }

    BpeModel::from_parts(merges, chars.into_iter().collect())
}

fn contains_pair(syms: &[String], pair: &(String, String)) -> bool {
    syms.windows(2).any(|w| w[0] == pair.0 && w[1] == pair.1)
}

/// Encodes tokens to subword ids; residual unknown symbols map to UNK.
pub fn apply_bpe(tokens: &[String], model: &BpeModel) -> Vec<u32> {
    let mut ids = Vec::new();
    for tok in tokens {
        for sym in model.segment(tok) {
            ids.push(model.id(&sym).unwrap_or(UNK_ID));
        }
    }
    ids
}

/// Wraps ids as `[BOS, ids..., EOS]`.
pub fn frame(ids: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(ids.len() + 2);
    out.push(BOS_ID);
    out.extend_from_slice(ids);
    out.push(EOS_ID);
    out
}

/// Inverse of [`apply_bpe`] up to whitespace: concatenates symbols, turns
/// end-of-word markers into spaces and strips specials.
pub fn decode_ids(ids: &[u32], model: &BpeModel) -> Result<String> {
    let mut text = String::new();
    for &id in ids {
        let Some(sym) = model.symbol(id) else {
            return Err(Error::IdOutOfRange {
                id,
                vocab: model.vocab_size(),
            });
        };
        if id == PAD_ID || id == BOS_ID || id == EOS_ID || id == UNK_ID {
            continue;
        }
        text.push_str(sym);
    }
    let text = text.replace(EOW, " ");
    Ok(text.trim_end().to_string())
}
