//! Text normalization, tokenization, test-corpus filtering and deterministic
//! synthetic languages.
//!
//! The tokenizer is a simplified stand-in for a full Moses pipeline: NFC
//! normalization, a small punctuation table, removal of non-printing
//! characters, whitespace splitting and peeling of leading/trailing ASCII
//! punctuation. That is deterministic, dependency-free and adequate for the
//! synthetic corpora this artifact trains on.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// One sentence with its language tag.
///
/// Invariants: `text` is NFC-normalized, `lang` is non-empty lowercase ASCII.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    text: String,
    lang: String,
}

impl Sentence {
    pub fn new(text: &str, lang: &str) -> Result<Self> {
        if lang.is_empty() {
            return Err(Error::Invalid("language tag must be non-empty".to_string()));
        }
        Ok(Sentence {
            text: text.nfc().collect(),
            lang: lang.to_ascii_lowercase(),
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }
}

/// Aligned sentence pairs between one source and one target language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitextCorpus {
    pub src_lang: String,
    pub tgt_lang: String,
    pub pairs: Vec<(Sentence, Sentence)>,
}

impl BitextCorpus {
    /// Checks the corpus invariants: tags match and no side is empty.
    pub fn new(src_lang: &str, tgt_lang: &str, pairs: Vec<(Sentence, Sentence)>) -> Result<Self> {
        for (i, (s, t)) in pairs.iter().enumerate() {
            if s.lang() != src_lang || t.lang() != tgt_lang {
                return Err(Error::Invalid(format!(
                    "pair {i} has languages {}/{} but corpus is {src_lang}/{tgt_lang}",
                    s.lang(),
                    t.lang()
                )));
            }
            if s.text().is_empty() || t.text().is_empty() {
                return Err(Error::Invalid(format!("pair {i} has an empty side")));
            }
        }
        Ok(BitextCorpus {
            src_lang: src_lang.to_string(),
            tgt_lang: tgt_lang.to_string(),
            pairs,
        })
    }
}

fn normalize_punct(c: char) -> Option<&'static str> {
    // Small fixed table; the full normalization table of the original
    // toolchain is out of scope.
    Some(match c {
        '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{02BC}' => "'",
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{00AB}' | '\u{00BB}' => "\"",
        '\u{2013}' | '\u{2014}' | '\u{2015}' => "-",
        '\u{2026}' => "...",
        '\u{00A0}' | '\u{2009}' | '\u{202F}' => " ",
        _ => return None,
    })
}

fn is_ascii_punct(c: char) -> bool {
    c.is_ascii_punctuation()
}

/// Normalizes a raw string and splits it into tokens.
///
/// Steps, in order: NFC, punctuation normalization, removal of non-printing
/// characters (controls that are not whitespace), Unicode-whitespace split,
/// then peeling leading/trailing ASCII punctuation into separate tokens.
/// Empty input yields an empty list. The result is stable under
/// re-tokenizing its space-joined form.
pub fn normalize_and_tokenize(raw: &str) -> Vec<String> {
    let mut cleaned = String::with_capacity(raw.len());
    for c in raw.nfc() {
        if let Some(rep) = normalize_punct(c) {
            cleaned.push_str(rep);
        } else if c.is_control() && !c.is_whitespace() {
            // non-printing: dropped
        } else {
            cleaned.push(c);
        }
    }

    let mut tokens = Vec::new();
    for word in cleaned.split_whitespace() {
        split_punct(word, &mut tokens);
    }
    tokens
}

fn split_punct(word: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = word.chars().collect();
    let mut lo = 0;
    let mut hi = chars.len();
    while lo < hi && is_ascii_punct(chars[lo]) {
        lo += 1;
    }
    while hi > lo && is_ascii_punct(chars[hi - 1]) {
        hi -= 1;
    }
    for &c in &chars[..lo] {
        out.push(c.to_string());
    }
    if lo < hi {
        out.push(chars[lo..hi].iter().collect());
    }
    for &c in &chars[hi..] {
        out.push(c.to_string());
    }
}

/// Number of whitespace-separated words, counted before punctuation splitting.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Applies the three test-set filters: drop pairs containing `@` or `http`,
/// drop pairs with fewer than three words on either side, and drop every pair
/// whose source or target text occurs more than once in the input. Survivor
/// order is preserved.
pub fn filter_test_corpus(pairs: &[(Sentence, Sentence)]) -> Vec<(Sentence, Sentence)> {
    use alloc::collections::BTreeMap;

    let mut src_count: BTreeMap<&str, usize> = BTreeMap::new();
    let mut tgt_count: BTreeMap<&str, usize> = BTreeMap::new();
    for (s, t) in pairs {
        *src_count.entry(s.text()).or_insert(0) += 1;
        *tgt_count.entry(t.text()).or_insert(0) += 1;
    }

    pairs
        .iter()
        .filter(|(s, t)| {
            let has_junk = |x: &str| x.contains('@') || x.contains("http");
            if has_junk(s.text()) || has_junk(t.text()) {
                return false;
            }
            if word_count(s.text()) < 3 || word_count(t.text()) < 3 {
                return false;
            }
            src_count[s.text()] == 1 && tgt_count[t.text()] == 1
        })
        .cloned()
        .collect()
}

/// Token-level bijective transform defining a synthetic language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transform {
    Identity,
    WordReverse,
    CaesarCipher { shift: u8 },
    SuffixTag { tag: String },
}

impl Transform {
    pub fn apply(&self, text: &str) -> String {
        match self {
            Transform::Identity => text.to_string(),
            Transform::WordReverse => {
                let mut words: Vec<&str> = text.split_whitespace().collect();
                words.reverse();
                words.join(" ")
            }
            Transform::CaesarCipher { shift } => caesar(text, *shift as i32),
            Transform::SuffixTag { tag } => text
                .split_whitespace()
                .map(|w| format!("{w}{tag}"))
                .collect::<Vec<_>>()
                .join(" "),
        }
    }

    /// Inverse transform; maps a generated sentence back to its source.
    pub fn invert(&self, text: &str) -> String {
        match self {
            Transform::Identity => text.to_string(),
            Transform::WordReverse => self.apply(text),
            Transform::CaesarCipher { shift } => caesar(text, -(*shift as i32)),
            Transform::SuffixTag { tag } => text
                .split_whitespace()
                .map(|w| w.strip_suffix(tag.as_str()).unwrap_or(w))
                .collect::<Vec<_>>()
                .join(" "),
        }
    }
}

fn caesar(text: &str, shift: i32) -> String {
    let shift = shift.rem_euclid(26) as u8;
    text.chars()
        .map(|c| {
            if c.is_ascii_lowercase() {
                (b'a' + (c as u8 - b'a' + shift) % 26) as char
            } else if c.is_ascii_uppercase() {
                (b'A' + (c as u8 - b'A' + shift) % 26) as char
            } else {
                c
            }
        })
        .collect()
}

impl FromStr for Transform {
    type Err = Error;

    /// Parses `identity`, `word-reverse`, `caesar-cipher:<shift>` or
    /// `suffix-tag:<tag>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name, arg) {
            ("identity", None) => Ok(Transform::Identity),
            ("word-reverse", None) => Ok(Transform::WordReverse),
            ("caesar-cipher", Some(a)) => {
                let shift: u8 = a
                    .parse()
                    .map_err(|_| Error::UnknownTransform(s.to_string()))?;
                Ok(Transform::CaesarCipher { shift })
            }
            ("suffix-tag", Some(a)) if !a.is_empty() => Ok(Transform::SuffixTag {
                tag: a.to_string(),
            }),
            _ => Err(Error::UnknownTransform(s.to_string())),
        }
    }
}

/// Specification of one synthetic language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticLangSpec {
    pub name: String,
    pub transform: Transform,
    pub seed: u64,
}

/// Builds a perfectly aligned bitext by transforming each seed sentence.
///
/// The transform is bijective at the token level, so the gold alignment is
/// exact and invertible; identical `(spec, corpus)` inputs always produce
/// identical output.
pub fn generate_synthetic_bitext(
    seed_corpus: &[Sentence],
    spec: &SyntheticLangSpec,
) -> Result<BitextCorpus> {
    if seed_corpus.is_empty() {
        return Err(Error::Invalid("seed corpus is empty".to_string()));
    }
    let src_lang = seed_corpus[0].lang().to_string();
    let mut pairs = Vec::with_capacity(seed_corpus.len());
    for s in seed_corpus {
        if s.lang() != src_lang {
            return Err(Error::Invalid(format!(
                "seed corpus mixes languages {} and {}",
                src_lang,
                s.lang()
            )));
        }
        let tgt = Sentence::new(&spec.transform.apply(s.text()), &spec.name)?;
        pairs.push((s.clone(), tgt));
    }
    BitextCorpus::new(&src_lang, &spec.name, pairs)
}
