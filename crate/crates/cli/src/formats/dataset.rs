//! Labeled dataset files: `label<TAB>sentence` for single-sentence tasks or
//! `label<TAB>premise<TAB>hypothesis` for pair tasks, one example per line.

use anyhow::{bail, Result};

/// Parsed labeled examples; the string labels are kept as-is and mapped to
/// ids by the consumer (sorted, first occurrence order is irrelevant).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabeledData {
    Single {
        labels: Vec<String>,
        texts: Vec<String>,
    },
    Pair {
        labels: Vec<String>,
        premises: Vec<String>,
        hypotheses: Vec<String>,
    },
}

impl LabeledData {
    pub fn len(&self) -> usize {
        match self {
            LabeledData::Single { labels, .. } | LabeledData::Pair { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> &[String] {
        match self {
            LabeledData::Single { labels, .. } | LabeledData::Pair { labels, .. } => labels,
        }
    }

    /// Distinct labels, sorted; label id = position in this list.
    pub fn label_table(&self) -> Vec<String> {
        let mut t: Vec<String> = self.labels().to_vec();
        t.sort();
        t.dedup();
        t
    }
}

pub fn parse(text: &str, source: &str) -> Result<LabeledData> {
    let mut labels = Vec::new();
    let mut firsts = Vec::new();
    let mut seconds: Vec<String> = Vec::new();
    let mut pair_mode: Option<bool> = None;
    for (ln, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let is_pair = match fields.len() {
            2 => false,
            3 => true,
            n => bail!("{source}:{}: expected 2 or 3 tab-separated fields, got {n}", ln + 1),
        };
        match pair_mode {
            None => pair_mode = Some(is_pair),
            Some(m) if m != is_pair => {
                bail!("{source}:{}: mixed single/pair rows", ln + 1)
            }
            _ => {}
        }
        if fields[0].is_empty() {
            bail!("{source}:{}: empty label", ln + 1);
        }
        labels.push(fields[0].to_string());
        firsts.push(fields[1].to_string());
        if is_pair {
            seconds.push(fields[2].to_string());
        }
    }
    if labels.is_empty() {
        bail!("{source}: no examples");
    }
    Ok(match pair_mode.unwrap() {
        false => LabeledData::Single {
            labels,
            texts: firsts,
        },
        true => LabeledData::Pair {
            labels,
            premises: firsts,
            hypotheses: seconds,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_sentence_rows() {
        let d = parse("food\tthe cake is sweet\nanimals\ta cat sleeps\n", "t").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.label_table(), vec!["animals".to_string(), "food".to_string()]);
    }

    #[test]
    fn parses_pair_rows() {
        let d = parse("yes\ta cat\tan animal\nno\ta cat\ta car\n", "t").unwrap();
        match d {
            LabeledData::Pair { premises, hypotheses, .. } => {
                assert_eq!(premises.len(), 2);
                assert_eq!(hypotheses[1], "a car");
            }
            _ => panic!("expected pair mode"),
        }
    }

    #[test]
    fn mixed_modes_are_rejected() {
        assert!(parse("a\tx\nb\ty\tz\n", "t").is_err());
    }
}
