//! Checkpoint container: a text config section followed by named TNS1
//! tensor records (model parameters, then Adam moments).
//!
//! Layout:
//! ```text
//! ckpt-v1
//! <key = value config block>
//! #tensors <count>
//! <tensor name>\n<TNS1 record>   (repeated, fixed order)
//! ```
//!
//! Loading validates every tensor shape against the config before the
//! parameters are used.

use anyhow::{bail, Context, Result};
use std::io::Read;

use glotvec_core::adam::AdamState;
use glotvec_core::model::{ModelConfig, ModelParams};
use glotvec_core::Tensor;

use super::tns1;
use crate::kv::KvBlock;

const HEADER: &str = "ckpt-v1";

/// Everything needed to resume or reuse a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model_cfg: ModelConfig,
    pub params: ModelParams<f32>,
    pub adam: AdamState<f32>,
    pub next_epoch: usize,
    pub seed: u64,
    /// Hash of the BPE model file this checkpoint was trained with.
    pub bpe_sha256: String,
}

pub fn render(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    ckpt.params.validate_shapes(&ckpt.model_cfg)?;
    let cfg = &ckpt.model_cfg;
    let mut kv = KvBlock::new();
    kv.push("vocab_size", cfg.vocab_size);
    kv.push("emb_dim", cfg.emb_dim);
    kv.push("hidden", cfg.hidden);
    kv.push("depth", cfg.depth);
    kv.push("dec_hidden", cfg.dec_hidden);
    kv.push("lang_emb_dim", cfg.lang_emb_dim);
    kv.push("langs", cfg.langs.join(","));
    kv.push("next_epoch", ckpt.next_epoch);
    kv.push("seed", ckpt.seed);
    kv.push("adam_t", ckpt.adam.step_count());
    kv.push("bpe_sha256", &ckpt.bpe_sha256);

    let named = ckpt.params.tensors();
    let (m, v) = ckpt.adam.moments();
    if m.len() != named.len() || v.len() != named.len() {
        bail!("optimizer state does not match parameter count");
    }

    let mut out = Vec::new();
    out.extend_from_slice(HEADER.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(kv.render().as_bytes());
    let total = named.len() * 3;
    out.extend_from_slice(format!("#tensors {total}\n").as_bytes());
    for (name, t) in &named {
        write_record(&mut out, name, t)?;
    }
    for ((name, _), t) in named.iter().zip(m.iter()) {
        write_record(&mut out, &format!("adam.m.{name}"), t)?;
    }
    for ((name, _), t) in named.iter().zip(v.iter()) {
        write_record(&mut out, &format!("adam.v.{name}"), t)?;
    }
    Ok(out)
}

fn write_record(out: &mut Vec<u8>, name: &str, t: &Tensor<f32>) -> Result<()> {
    out.extend_from_slice(name.as_bytes());
    out.push(b'\n');
    tns1::write_tensor(out, t)?;
    Ok(())
}

pub fn parse(bytes: &[u8], source: &str) -> Result<Checkpoint> {
    let marker = b"#tensors ";
    let Some(marker_at) = find_line_start(bytes, marker) else {
        bail!("{source}: missing '#tensors' section");
    };
    let head_text = std::str::from_utf8(&bytes[..marker_at])
        .with_context(|| format!("{source}: header is not UTF-8"))?;
    let mut lines = head_text.lines();
    let first = lines.next().unwrap_or_default();
    if first != HEADER {
        bail!("{source}: expected '{HEADER}' header, got '{first}'");
    }
    let kv_text: String = lines.map(|l| format!("{l}\n")).collect();
    let kv = KvBlock::parse(&kv_text, source)?;

    let langs_joined = kv.require("langs")?.to_string();
    let langs: Vec<&str> = langs_joined.split(',').collect();
    let mut model_cfg = ModelConfig::new(kv.parse_field("vocab_size")?, &langs);
    model_cfg.emb_dim = kv.parse_field("emb_dim")?;
    model_cfg.hidden = kv.parse_field("hidden")?;
    model_cfg.depth = kv.parse_field("depth")?;
    model_cfg.dec_hidden = kv.parse_field("dec_hidden")?;
    model_cfg.lang_emb_dim = kv.parse_field("lang_emb_dim")?;
    model_cfg.validate()?;
    if model_cfg.langs.len() != langs.len() {
        bail!("{source}: language table has duplicates");
    }

    let mut cursor = &bytes[marker_at + marker.len()..];
    let count_line = take_line(&mut cursor)
        .with_context(|| format!("{source}: truncated '#tensors' line"))?;
    let declared: usize = count_line
        .trim()
        .parse()
        .with_context(|| format!("{source}: bad tensor count '{count_line}'"))?;

    let mut records: Vec<(String, Tensor<f32>)> = Vec::with_capacity(declared);
    for _ in 0..declared {
        let name = take_line(&mut cursor)
            .with_context(|| format!("{source}: truncated tensor name"))?;
        let tensor = tns1::read_tensor(&mut cursor)
            .with_context(|| format!("{source}: tensor '{name}'"))?;
        records.push((name, tensor));
    }
    if !cursor.is_empty() {
        bail!("{source}: {} trailing bytes after tensors", cursor.len());
    }

    let mut params = ModelParams::<f32>::zeros(&model_cfg);
    let expected: Vec<String> = params.tensors().iter().map(|(n, _)| n.clone()).collect();
    if records.len() != expected.len() * 3 {
        bail!(
            "{source}: expected {} tensors, found {}",
            expected.len() * 3,
            records.len()
        );
    }
    for ((name, value), want) in records[..expected.len()].iter().zip(expected.iter()) {
        if name != want {
            bail!("{source}: tensor '{name}' out of order (expected '{want}')");
        }
        value.clone_into_named(&mut params, want)?;
    }
    let mut m = Vec::with_capacity(expected.len());
    let mut v = Vec::with_capacity(expected.len());
    for (i, want) in expected.iter().enumerate() {
        let (name, value) = &records[expected.len() + i];
        if name != &format!("adam.m.{want}") {
            bail!("{source}: unexpected moment tensor '{name}'");
        }
        m.push(value.clone());
        let (name, value) = &records[2 * expected.len() + i];
        if name != &format!("adam.v.{want}") {
            bail!("{source}: unexpected moment tensor '{name}'");
        }
        v.push(value.clone());
    }
    params.validate_shapes(&model_cfg)?;
    for ((name, p), (mm, vv)) in params.tensors().iter().zip(m.iter().zip(v.iter())) {
        if mm.shape() != p.shape() || vv.shape() != p.shape() {
            bail!("{source}: optimizer moment for '{name}' has wrong shape");
        }
    }

    Ok(Checkpoint {
        model_cfg,
        params,
        adam: AdamState::from_parts(m, v, kv.parse_field("adam_t")?),
        next_epoch: kv.parse_field("next_epoch")?,
        seed: kv.parse_field("seed")?,
        bpe_sha256: kv.require("bpe_sha256")?.to_string(),
    })
}

/// Byte offset of the first line starting with `needle`.
pub(crate) fn find_line_start(bytes: &[u8], needle: &[u8]) -> Option<usize> {
    if bytes.starts_with(needle) {
        return Some(0);
    }
    let mut at = 0;
    while let Some(nl) = bytes[at..].iter().position(|&b| b == b'\n') {
        let start = at + nl + 1;
        if bytes[start..].starts_with(needle) {
            return Some(start);
        }
        at = start;
    }
    None
}

pub(crate) fn take_line(cursor: &mut &[u8]) -> Result<String> {
    let Some(nl) = cursor.iter().position(|&b| b == b'\n') else {
        bail!("unterminated line");
    };
    let line = std::str::from_utf8(&cursor[..nl])
        .context("line is not UTF-8")?
        .to_string();
    let mut rest = &cursor[nl + 1..];
    std::mem::swap(cursor, &mut rest);
    Ok(line)
}

trait CloneIntoNamed {
    fn clone_into_named(&self, params: &mut ModelParams<f32>, name: &str) -> Result<()>;
}

impl CloneIntoNamed for Tensor<f32> {
    fn clone_into_named(&self, params: &mut ModelParams<f32>, name: &str) -> Result<()> {
        for (n, t) in params.tensors_mut() {
            if n == name {
                if t.shape() != self.shape() {
                    bail!(
                        "tensor '{name}' has shape {:?}, config requires {:?}",
                        self.shape(),
                        t.shape()
                    );
                }
                t.data_mut().copy_from_slice(self.data());
                return Ok(());
            }
        }
        bail!("unknown tensor '{name}'");
    }
}
