//! Corpus manifests, training manifests and per-run manifests.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::kv::KvBlock;

/// Plain-text pointer to a parallel corpus: two line-aligned files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    pub src_path: PathBuf,
    pub tgt_path: PathBuf,
    pub src_lang: String,
    pub tgt_lang: String,
}

impl CorpusManifest {
    pub fn parse(text: &str, source: &str, base_dir: &Path) -> Result<Self> {
        let kv = KvBlock::parse(text, source)?;
        Ok(CorpusManifest {
            src_path: base_dir.join(kv.require("src_path")?),
            tgt_path: base_dir.join(kv.require("tgt_path")?),
            src_lang: kv.require("src_lang")?.to_string(),
            tgt_lang: kv.require("tgt_lang")?.to_string(),
        })
    }

    /// Renders with paths relative to the manifest's own directory.
    pub fn render(&self, src_rel: &str, tgt_rel: &str) -> String {
        let mut kv = KvBlock::new();
        kv.push("src_path", src_rel);
        kv.push("tgt_path", tgt_rel);
        kv.push("src_lang", &self.src_lang);
        kv.push("tgt_lang", &self.tgt_lang);
        kv.render()
    }
}

/// The full training configuration: corpora + BPE model + hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainManifest {
    pub corpus_manifests: Vec<PathBuf>,
    pub bpe_path: PathBuf,
    pub target_langs: [String; 2],
    pub lr: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub max_tokens_per_batch: usize,
    pub seed: u64,
    pub nli_weight: f64,
    pub depth: usize,
    pub hidden: usize,
    pub emb_dim: usize,
    pub dec_hidden: usize,
    pub lang_emb_dim: usize,
    pub nli_data: Option<PathBuf>,
    pub nli_hidden: Vec<usize>,
    pub nli_batch: usize,
}

impl TrainManifest {
    pub fn parse(text: &str, source: &str, base_dir: &Path) -> Result<Self> {
        let kv = KvBlock::parse(text, source)?;
        let corpora: Vec<PathBuf> = kv
            .get_all("corpus")
            .into_iter()
            .map(|p| base_dir.join(p))
            .collect();
        if corpora.is_empty() {
            bail!("{source}: at least one 'corpus = <manifest>' entry is required");
        }
        let targets_raw = kv.require("target_langs")?;
        let targets: Vec<&str> = targets_raw.split(',').collect();
        if targets.len() != 2 {
            bail!("{source}: target_langs must list exactly two tags, got '{targets_raw}'");
        }
        let nli_hidden = match kv.get("nli_hidden") {
            None => vec![512, 384],
            Some(raw) => raw
                .split(',')
                .map(|s| s.parse().context("bad nli_hidden entry"))
                .collect::<Result<_>>()?,
        };
        Ok(TrainManifest {
            corpus_manifests: corpora,
            bpe_path: base_dir.join(kv.require("bpe")?),
            target_langs: [targets[0].to_string(), targets[1].to_string()],
            lr: kv.parse_field_or("lr", 0.001)?,
            dropout: kv.parse_field_or("dropout", 0.1)?,
            epochs: kv.parse_field_or("epochs", 17)?,
            max_tokens_per_batch: kv.parse_field_or("max_tokens_per_batch", 4000)?,
            seed: kv.parse_field_or("seed", 1)?,
            nli_weight: kv.parse_field_or("nli_weight", 0.0)?,
            depth: kv.parse_field_or("depth", 1)?,
            hidden: kv.parse_field_or("hidden", 512)?,
            emb_dim: kv.parse_field_or("emb_dim", 320)?,
            dec_hidden: kv.parse_field_or("dec_hidden", 2048)?,
            lang_emb_dim: kv.parse_field_or("lang_emb_dim", 32)?,
            nli_data: kv.get("nli_data").map(|p| base_dir.join(p)),
            nli_hidden,
            nli_batch: kv.parse_field_or("nli_batch", 32)?,
        })
    }

    /// Canonical snapshot of the parsed configuration (absolute paths).
    pub fn snapshot(&self) -> KvBlock {
        let mut kv = KvBlock::new();
        for c in &self.corpus_manifests {
            kv.push("corpus", c.display());
        }
        kv.push("bpe", self.bpe_path.display());
        kv.push("target_langs", self.target_langs.join(","));
        kv.push("lr", self.lr);
        kv.push("dropout", self.dropout);
        kv.push("epochs", self.epochs);
        kv.push("max_tokens_per_batch", self.max_tokens_per_batch);
        kv.push("seed", self.seed);
        kv.push("nli_weight", self.nli_weight);
        kv.push("depth", self.depth);
        kv.push("hidden", self.hidden);
        kv.push("emb_dim", self.emb_dim);
        kv.push("dec_hidden", self.dec_hidden);
        kv.push("lang_emb_dim", self.lang_emb_dim);
        if let Some(p) = &self.nli_data {
            kv.push("nli_data", p.display());
            let hidden: Vec<String> = self.nli_hidden.iter().map(|s| s.to_string()).collect();
            kv.push("nli_hidden", hidden.join(","));
            kv.push("nli_batch", self.nli_batch);
        }
        kv
    }
}

/// Record of one successful command: config snapshot plus input/output
/// hashes. The hash algorithm is stated in the header line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub wallclock_ms: u64,
    pub config: Vec<(String, String)>,
    /// `(hash, path)` pairs.
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            wallclock_ms: 0,
            config: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let mut kv = KvBlock::new();
        kv.push("command", &self.command);
        kv.push("version", &self.version);
        if let Some(seed) = self.seed {
            kv.push("seed", seed);
        }
        kv.push("wallclock_ms", self.wallclock_ms);
        for (k, v) in &self.config {
            kv.push(&format!("config.{k}"), v);
        }
        for (hash, path) in &self.inputs {
            kv.push("input", format!("{hash} {path}"));
        }
        for (hash, path) in &self.outputs {
            kv.push("output", format!("{hash} {path}"));
        }
        format!("# glotvec run manifest; hashes are sha256\n{}", kv.render())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let kv = KvBlock::parse(text, source)?;
        let split_hash = |v: &str| -> Result<(String, String)> {
            let Some((hash, path)) = v.split_once(' ') else {
                bail!("{source}: expected '<hash> <path>', got '{v}'");
            };
            Ok((hash.to_string(), path.to_string()))
        };
        Ok(RunManifest {
            command: kv.require("command")?.to_string(),
            version: kv.require("version")?.to_string(),
            seed: match kv.get("seed") {
                None => None,
                Some(raw) => Some(raw.parse().context("bad seed")?),
            },
            wallclock_ms: kv.parse_field("wallclock_ms")?,
            config: kv
                .entries()
                .iter()
                .filter_map(|(k, v)| {
                    k.strip_prefix("config.").map(|k| (k.to_string(), v.clone()))
                })
                .collect(),
            inputs: kv
                .get_all("input")
                .into_iter()
                .map(split_hash)
                .collect::<Result<_>>()?,
            outputs: kv
                .get_all("output")
                .into_iter()
                .map(split_hash)
                .collect::<Result<_>>()?,
        })
    }
}
