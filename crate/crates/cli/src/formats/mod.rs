//! Binary and text file formats. All multi-byte integers are little-endian.

pub mod bpe_file;
pub mod checkpoint;
pub mod dataset;
pub mod emb1;
pub mod head_file;
pub mod tns1;
