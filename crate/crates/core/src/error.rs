//! Error type shared by all core modules.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Shape disagreement between operands; `op` names the failing operation.
    DimMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    /// BPE training saw no text at all.
    EmptyTrainingText,
    /// `num_merges` was zero.
    InvalidMergeCount,
    /// A token id outside the vocabulary.
    IdOutOfRange { id: u32, vocab: usize },
    /// A sequence was empty (or fully masked) where at least one step is required.
    EmptySequence,
    /// Cross-entropy over zero non-ignored rows.
    NoScoredRows,
    /// A gradient contained NaN or infinity.
    NonFiniteGradient,
    /// Training loss became NaN or infinity.
    NonFiniteLoss { epoch: usize, task: String },
    /// Language tag absent from the language table.
    UnknownLanguage { lang: String, known: Vec<String> },
    /// Synthetic-language transform name not recognised.
    UnknownTransform(String),
    /// A training corpus translates a language into itself.
    AutoEncodingPair { lang: String },
    /// A corpus targets a language outside the configured pivots.
    NonPivotTarget { lang: String },
    /// Margin ratio with a zero neighborhood mean.
    DegenerateNeighborhood,
    /// k exceeds the number of index rows.
    KTooLarge { k: usize, rows: usize },
    /// A row with zero norm was offered to a cosine index.
    ZeroNormRow { row: usize },
    /// Duplicate external id in an embedding matrix.
    DuplicateId(String),
    /// A single pair exceeds the token budget; `index` is its position in the corpus.
    OversizedPair { index: usize, len: usize, max: usize },
    /// Gold alignment is not a bijection.
    NotBijective(String),
    /// A class label has no training examples.
    MissingClass { class: usize },
    /// Catch-all for precondition violations; the message is user-facing.
    Invalid(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimMismatch { op, expected, got } => {
                write!(f, "{op}: dimension mismatch (expected {expected}, got {got})")
            }
            Error::EmptyTrainingText => write!(f, "empty training text"),
            Error::InvalidMergeCount => write!(f, "num_merges must be \u{2265} 1"),
            Error::IdOutOfRange { id, vocab } => {
                write!(f, "id {id} out of range for vocabulary of {vocab} symbols")
            }
            Error::EmptySequence => write!(f, "empty sequence"),
            Error::NoScoredRows => write!(f, "no non-ignored rows to score"),
            Error::NonFiniteGradient => write!(f, "non-finite gradient"),
            Error::NonFiniteLoss { epoch, task } => {
                write!(f, "non-finite loss at epoch {epoch}, task {task}")
            }
            Error::UnknownLanguage { lang, known } => {
                write!(f, "unknown language tag '{lang}' (known:")?;
                for k in known {
                    write!(f, " {k}")?;
                }
                write!(f, ")")
            }
            Error::UnknownTransform(name) => write!(f, "unknown transform '{name}'"),
            Error::AutoEncodingPair { lang } => {
                write!(f, "auto-encoding pair rejected ({lang}\u{2192}{lang})")
            }
            Error::NonPivotTarget { lang } => {
                write!(f, "corpus targets non-pivot language '{lang}'")
            }
            Error::DegenerateNeighborhood => write!(f, "degenerate neighborhood"),
            Error::KTooLarge { k, rows } => write!(f, "k={k} exceeds index size {rows}"),
            Error::ZeroNormRow { row } => write!(f, "zero-norm embedding at row {row}"),
            Error::DuplicateId(id) => write!(f, "duplicate embedding id '{id}'"),
            Error::OversizedPair { index, len, max } => {
                write!(f, "pair {index} has framed length {len} > max_tokens {max}")
            }
            Error::NotBijective(msg) => write!(f, "gold alignment is not a bijection: {msg}"),
            Error::MissingClass { class } => {
                write!(f, "class {class} absent from training data")
            }
            Error::Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
