//! Classifier-head files: config text, the label table, the hash of the
//! encoder checkpoint the training features came from, then TNS1 tensors.

use anyhow::{bail, Context, Result};

use glotvec_core::heads::MlpHead;
use glotvec_core::Tensor;

use super::checkpoint::{find_line_start, take_line};
use super::tns1;
use crate::kv::KvBlock;

const HEADER: &str = "head-v1";

/// A trained head plus the metadata needed to apply it safely.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadFile {
    pub head: MlpHead<f32>,
    /// Class names in label-id order.
    pub labels: Vec<String>,
    /// Whether features are pair features (premise/hypothesis) or single
    /// sentence embeddings.
    pub pair_mode: bool,
    /// sha256 of the encoder checkpoint used to produce training features.
    pub encoder_sha256: String,
}

pub fn render(hf: &HeadFile) -> Result<Vec<u8>> {
    let mut kv = KvBlock::new();
    let sizes: Vec<String> = hf.head.sizes().iter().map(|s| s.to_string()).collect();
    kv.push("sizes", sizes.join(","));
    kv.push("labels", hf.labels.join(","));
    kv.push("pair_mode", hf.pair_mode);
    kv.push("encoder_sha256", &hf.encoder_sha256);

    let mut out = Vec::new();
    out.extend_from_slice(HEADER.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(kv.render().as_bytes());
    let layers = hf.head.layers();
    out.extend_from_slice(format!("#tensors {}\n", layers.len() * 2).as_bytes());
    for (i, (w, b)) in layers.iter().enumerate() {
        out.extend_from_slice(format!("layer{i}.w\n").as_bytes());
        tns1::write_tensor(&mut out, w)?;
        out.extend_from_slice(format!("layer{i}.b\n").as_bytes());
        tns1::write_tensor(&mut out, b)?;
    }
    Ok(out)
}

pub fn parse(bytes: &[u8], source: &str) -> Result<HeadFile> {
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

    let sizes: Vec<usize> = kv
        .require("sizes")?
        .split(',')
        .map(|s| s.parse().context("bad size"))
        .collect::<Result<_>>()?;
    let labels: Vec<String> = kv.require("labels")?.split(',').map(str::to_string).collect();
    if labels.len() != *sizes.last().unwrap_or(&0) {
        bail!("{source}: {} labels for {:?} output units", labels.len(), sizes.last());
    }

    let mut cursor = &bytes[marker_at + marker.len()..];
    let count_line = take_line(&mut cursor)?;
    let declared: usize = count_line.trim().parse().context("bad tensor count")?;
    if declared != (sizes.len() - 1) * 2 {
        bail!("{source}: expected {} tensors, header says {declared}", (sizes.len() - 1) * 2);
    }
    let mut layers: Vec<(Tensor<f32>, Tensor<f32>)> = Vec::new();
    for i in 0..sizes.len() - 1 {
        let name = take_line(&mut cursor)?;
        if name != format!("layer{i}.w") {
            bail!("{source}: unexpected tensor '{name}'");
        }
        let w = tns1::read_tensor(&mut cursor)?;
        let name = take_line(&mut cursor)?;
        if name != format!("layer{i}.b") {
            bail!("{source}: unexpected tensor '{name}'");
        }
        let b = tns1::read_tensor(&mut cursor)?;
        layers.push((w, b));
    }
    if !cursor.is_empty() {
        bail!("{source}: trailing bytes after tensors");
    }

    Ok(HeadFile {
        head: MlpHead::from_tensors(sizes, layers)?,
        labels,
        pair_mode: kv.parse_field("pair_mode")?,
        encoder_sha256: kv.require("encoder_sha256")?.to_string(),
    })
}
