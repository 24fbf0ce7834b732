//! The `bpe-v1` model file.
//!
//! Line 1 is the header `bpe-v1 <num_merges>`; one `left right` merge per
//! line in priority order; then a `#chars` line introducing the training
//! character inventory, one symbol per line. The vocabulary is rebuilt
//! deterministically from these parts on load. Symbols never contain
//! whitespace (the tokenizer guarantees it), so the space separator is safe.

use anyhow::{bail, Context, Result};

use glotvec_core::bpe::BpeModel;

pub fn render(model: &BpeModel) -> String {
    let mut out = String::new();
    out.push_str(&format!("bpe-v1 {}\n", model.merges().len()));
    for (l, r) in model.merges() {
        out.push_str(l);
        out.push(' ');
        out.push_str(r);
        out.push('\n');
    }
    out.push_str("#chars\n");
    for c in model.chars() {
        out.push_str(c);
        out.push('\n');
    }
    out
}

pub fn parse(text: &str, source: &str) -> Result<BpeModel> {
    let mut lines = text.lines();
    let header = lines.next().with_context(|| format!("{source}: empty file"))?;
    let Some(count) = header.strip_prefix("bpe-v1 ") else {
        bail!("{source}: expected 'bpe-v1 <n>' header, got '{header}'");
    };
    let count: usize = count
        .trim()
        .parse()
        .with_context(|| format!("{source}: bad merge count '{count}'"))?;

    let mut merges = Vec::with_capacity(count);
    let mut chars = Vec::new();
    let mut in_chars = false;
    for (ln, line) in lines.enumerate() {
        if line == "#chars" {
            in_chars = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if in_chars {
            chars.push(line.to_string());
        } else {
            let Some((l, r)) = line.split_once(' ') else {
                bail!("{source}:{}: expected 'left right' merge, got '{line}'", ln + 2);
            };
            merges.push((l.to_string(), r.to_string()));
        }
    }
    if merges.len() != count {
        bail!(
            "{source}: header declares {count} merges but file has {}",
            merges.len()
        );
    }
    Ok(BpeModel::from_parts(merges, chars)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use glotvec_core::bpe::learn_bpe;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn roundtrip_rebuilds_identical_model() {
        let model = learn_bpe(&[toks(&["low", "lower", "newest", "wide"])], 12).unwrap();
        let text = render(&model);
        assert!(text.starts_with("bpe-v1 "));
        let back = parse(&text, "mem").unwrap();
        assert_eq!(back, model);
        assert_eq!(render(&back), text);
    }

    #[test]
    fn merge_count_mismatch_is_rejected() {
        let err = parse("bpe-v1 2\na b\n#chars\na\nb\n", "mem").unwrap_err();
        assert!(err.to_string().contains("declares 2 merges"));
    }
}
