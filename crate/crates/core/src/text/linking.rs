use std::collections::BTreeSet;
use std::path::Path;

use super::tokenize::{tokenize, Token, TokenSeq};
use super::TextError;

pub const DEFAULT_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    canonical: String,
    alias: String,
    alias_norms: BTreeSet<String>,
    alias_len: usize,
}

/// Alias → canonical KB label table with a similarity threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Gazetteer {
    entries: Vec<Entry>,
    threshold: f64,
}

impl Default for Gazetteer {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl Gazetteer {
    pub fn new(threshold: f64) -> Result<Self, TextError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(TextError::Threshold(threshold));
        }
        Ok(Self {
            entries: Vec::new(),
            threshold,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn add(&mut self, alias: &str, canonical: &str) -> Result<(), TextError> {
        let canonical = canonical.trim();
        if canonical.is_empty() {
            return Err(TextError::EmptyLabel);
        }
        let toks = tokenize(alias);
        if toks.is_empty() {
            return Err(TextError::EmptyLabel);
        }
        self.entries.push(Entry {
            canonical: canonical.to_string(),
            alias: toks.norms().join(" "),
            alias_norms: toks.norms().into_iter().map(str::to_string).collect(),
            alias_len: toks.len(),
        });
        Ok(())
    }

    /// Parses `alias<TAB>canonical label` lines.
    pub fn parse(text: &str, threshold: f64) -> Result<Self, TextError> {
        let mut g = Self::new(threshold)?;
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (alias, canonical) = line.split_once('\t').ok_or(TextError::Format {
                what: "gazetteer",
                line: idx + 1,
            })?;
            g.add(alias, canonical).map_err(|_| TextError::Format {
                what: "gazetteer",
                line: idx + 1,
            })?;
        }
        Ok(g)
    }

    pub fn load(path: &Path, threshold: f64) -> Result<Self, TextError> {
        Self::parse(&std::fs::read_to_string(path)?, threshold)
    }

    fn max_span(&self) -> usize {
        self.entries.iter().map(|e| e.alias_len).max().unwrap_or(0) + 1
    }

    /// Best entry for a span: highest similarity, first entry on ties.
    fn best(&self, span: &[Token]) -> Option<(&Entry, f64)> {
        let norms: BTreeSet<String> = span.iter().map(|t| t.norm.clone()).collect();
        let joined = span
            .iter()
            .map(|t| t.norm.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let mut best: Option<(&Entry, f64)> = None;
        for e in &self.entries {
            let s = blend(&norms, &e.alias_norms, &joined, &e.alias);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((e, s));
            }
        }
        best
    }
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn blend(a_set: &BTreeSet<String>, b_set: &BTreeSet<String>, a: &str, b: &str) -> f64 {
    0.5 * jaccard(a_set, b_set) + 0.5 * strsim::normalized_levenshtein(a, b)
}

/// Mention/alias similarity: half token-set Jaccard, half normalized
/// Levenshtein similarity over the lowercased, space-joined strings.
pub fn similarity(mention: &str, alias: &str) -> f64 {
    let a = tokenize(mention);
    let b = tokenize(alias);
    let a_set = a.norms().into_iter().map(str::to_string).collect();
    let b_set = b.norms().into_iter().map(str::to_string).collect();
    blend(&a_set, &b_set, &a.norms().join(" "), &b.norms().join(" "))
}

/// Greedy leftmost-longest replacement of alias mentions by canonical labels.
pub fn link_entities(q: &TokenSeq, g: &Gazetteer) -> TokenSeq {
    if g.is_empty() {
        return q.clone();
    }
    let mut out = q.clone();
    let max_span = g.max_span();
    let mut i = 0;
    while i < out.len() {
        let mut replaced = None;
        let longest = max_span.min(out.len() - i);
        for len in (1..=longest).rev() {
            let span = &out.tokens()[i..i + len];
            if let Some((entry, score)) = g.best(span) {
                if score >= g.threshold {
                    replaced = Some((len, entry.canonical.clone()));
                    break;
                }
            }
        }
        match replaced {
            Some((len, canonical)) => {
                let label = TokenSeq::verbatim(&canonical);
                let n = label.len();
                out.splice(i, i + len, label.tokens().to_vec());
                i += n.max(1);
            }
            None => i += 1,
        }
    }
    out
}
