use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grammar::category::Category;

/// Fallback for words missing from the lexicon: a fixed candidate set, each
/// candidate scored with a flat penalty.
#[derive(Debug, Clone)]
pub struct OovPolicy {
    pub categories: Vec<Category>,
    pub penalty: f64,
}

/// Word-to-supertag assignments with log-probability scores.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<(Category, f64)>>,
    oov: Option<OovPolicy>,
}

impl Lexicon {
    pub fn new(entries: BTreeMap<String, Vec<(Category, f64)>>) -> Lexicon {
        Lexicon { entries, oov: None }
    }

    pub fn with_oov(mut self, policy: OovPolicy) -> Lexicon {
        self.oov = Some(policy);
        self
    }

    /// Parses the lexicon file format: one `word<TAB>category<TAB>logprob`
    /// entry per line, `#` comments allowed.
    pub fn parse(text: &str, path: &str) -> Result<Lexicon> {
        let mut entries: BTreeMap<String, Vec<(Category, f64)>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::data_at(
                    path,
                    i + 1,
                    "expected `word<TAB>category<TAB>logprob`",
                ));
            }
            let category: Category = fields[1]
                .trim()
                .parse()
                .map_err(|e| Error::data_at(path, i + 1, e))?;
            let logprob: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|e| Error::data_at(path, i + 1, format!("bad logprob: {e}")))?;
            if !logprob.is_finite() || logprob > 0.0 {
                return Err(Error::data_at(
                    path,
                    i + 1,
                    format!("logprob must be finite and <= 0, got {logprob}"),
                ));
            }
            entries
                .entry(fields[0].to_string())
                .or_default()
                .push((category, logprob));
        }
        Ok(Lexicon { entries, oov: None })
    }

    /// Scored supertag candidates for a word. Unknown words fall back to the
    /// OOV policy when one is configured.
    pub fn lexical_categories(&self, word: &str) -> Result<Vec<(Category, f64)>> {
        if let Some(cands) = self.entries.get(word) {
            return Ok(cands.clone());
        }
        match &self.oov {
            Some(policy) => Ok(policy
                .categories
                .iter()
                .map(|c| (c.clone(), policy.penalty))
                .collect()),
            None => Err(Error::Decode(format!(
                "word {word:?} not in lexicon and no OOV policy configured"
            ))),
        }
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn categories(&self) -> impl Iterator<Item = &Category> {
        self.entries.values().flatten().map(|(c, _)| c)
    }
}
