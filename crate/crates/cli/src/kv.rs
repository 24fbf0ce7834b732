//! The `key = value` config grammar shared by every text config, manifest
//! and report header in this project.
//!
//! Grammar, by line: blank lines and lines starting with `#` are ignored;
//! everything else must be `key = value` with a single ` = ` separator (the
//! first occurrence wins, so values may contain `=`). Keys repeat where a
//! list is meant. Writing is canonical: entries in order, one `key = value`
//! per line, trailing newline. Parse-then-write of a written file is
//! byte-identical.

use anyhow::{bail, Context, Result};

/// Ordered key/value entries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KvBlock {
    entries: Vec<(String, String)>,
}

impl KvBlock {
    pub fn new() -> Self {
        KvBlock::default()
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .with_context(|| format!("missing required key '{key}'"))
    }

    pub fn get_all(&self, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .collect()
    }

    pub fn parse_field<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|e| anyhow::anyhow!("key '{key}': cannot parse '{raw}': {e}"))
    }

    pub fn parse_field_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|e| anyhow::anyhow!("key '{key}': cannot parse '{raw}': {e}")),
        }
    }

    /// Parses the grammar; `source` names the input in error messages.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let trimmed = line.trim_end();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once(" = ") else {
                bail!("{source}:{}: expected 'key = value', got '{trimmed}'", ln + 1);
            };
            if key.is_empty() || key.contains(char::is_whitespace) {
                bail!("{source}:{}: invalid key '{key}'", ln + 1);
            }
            entries.push((key.to_string(), value.to_string()));
        }
        Ok(KvBlock { entries })
    }

    /// Canonical text form.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_render_is_canonical() {
        let text = "a = 1\nb = two words\nc = x=y\n";
        let block = KvBlock::parse(text, "test").unwrap();
        assert_eq!(block.render(), text);
        assert_eq!(block.get("c"), Some("x=y"));
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let block = KvBlock::parse("# header\n\nk = v\n", "test").unwrap();
        assert_eq!(block.entries().len(), 1);
    }

    #[test]
    fn repeated_keys_are_kept_in_order() {
        let block = KvBlock::parse("x = 1\nx = 2\n", "test").unwrap();
        assert_eq!(block.get_all("x"), vec!["1", "2"]);
        assert_eq!(block.get("x"), Some("1"));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(KvBlock::parse("nokey\n", "test").is_err());
        assert!(KvBlock::parse("bad key = 1\n", "test").is_err());
    }
}
