//! Core algorithms for joint multilingual sentence embeddings.
//!
//! A single BiLSTM encoder with a shared subword vocabulary maps sentences
//! from any language into one embedding space. The encoder is trained through
//! an auxiliary translation decoder on parallel corpora and then reused, frozen,
//! for downstream work: margin-based bitext mining, cosine similarity search
//! and zero-shot transfer classifiers.
//!
//! This crate is `no_std` (with `alloc`) and holds the algorithmic core only:
//! text normalization and synthetic corpora ([`text`]), byte-pair encoding
//! ([`bpe`]), dense kernels and the gradient-check oracle ([`tensor`], [`lstm`],
//! [`ops`], [`adam`], [`gradcheck`]), the encoder/decoder model ([`model`]),
//! the training loop ([`trainer`]), retrieval and mining ([`retrieval`]) and
//! classifier heads ([`heads`]). File formats, IO and the command-line front
//! end live in the companion `glotvec` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod adam;
pub mod bpe;
pub mod error;
pub mod executor;
pub mod gradcheck;
pub mod heads;
pub mod linalg;
pub mod lstm;
pub mod model;
pub mod ops;
pub mod retrieval;
pub mod rng;
pub mod tensor;
pub mod text;
pub mod trainer;

pub use error::{Error, Result};
pub use executor::{Executor, Serial};
pub use rng::SplitRng;
pub use tensor::{Scalar, Tensor};
