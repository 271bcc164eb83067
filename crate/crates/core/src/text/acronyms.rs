use std::collections::BTreeMap;
use std::path::Path;

use super::tokenize::TokenSeq;
use super::TextError;

/// Country and organisation acronyms shipped with the crate.
const BUILTIN: &[(&str, &str)] = &[
    ("UK", "United Kingdom"),
    ("U.K", "United Kingdom"),
    ("US", "United States"),
    ("U.S", "United States"),
    ("USA", "United States"),
    ("U.S.A", "United States"),
    ("UAE", "United Arab Emirates"),
    ("USSR", "Soviet Union"),
    ("GDR", "East Germany"),
    ("FRG", "West Germany"),
    ("PRC", "China"),
    ("ROC", "Taiwan"),
    ("DRC", "Democratic Republic of the Congo"),
    ("NZ", "New Zealand"),
    ("EU", "European Union"),
    ("UN", "United Nations"),
    ("NYC", "New York City"),
    ("LA", "Los Angeles"),
];

/// Case-sensitive acronym → expansion table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AcronymMap {
    entries: BTreeMap<String, String>,
}

impl AcronymMap {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut map = Self::default();
        for (k, v) in BUILTIN {
            map.entries.insert((*k).to_string(), (*v).to_string());
        }
        map
    }

    pub fn from_pairs<I, K, V>(pairs: I) -> Result<Self, TextError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let mut map = Self::default();
        for (k, v) in pairs {
            map.insert(k.into(), v.into())?;
        }
        Ok(map)
    }

    /// Adds one entry. An expansion may not itself be a key.
    pub fn insert(&mut self, acronym: String, expansion: String) -> Result<(), TextError> {
        if self.entries.contains_key(&expansion) || expansion == acronym {
            return Err(TextError::AcronymCycle(acronym));
        }
        if self.entries.values().any(|v| *v == acronym) {
            return Err(TextError::AcronymCycle(acronym));
        }
        self.entries.insert(acronym, expansion);
        Ok(())
    }

    /// Parses `ACRONYM<TAB>Expansion` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, TextError> {
        let mut map = Self::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('\t').ok_or(TextError::Format {
                what: "acronym",
                line: idx + 1,
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(TextError::Format {
                    what: "acronym",
                    line: idx + 1,
                });
            }
            map.insert(k.to_string(), v.to_string())?;
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Merges `other` into `self`, later entries winning.
    pub fn extend(&mut self, other: &AcronymMap) -> Result<(), TextError> {
        for (k, v) in &other.entries {
            self.entries.remove(k);
            self.insert(k.clone(), v.clone())?;
        }
        Ok(())
    }

    pub fn get(&self, acronym: &str) -> Option<&str> {
        self.entries.get(acronym).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Replaces every token whose surface is exactly an acronym key by the
/// tokenized expansion. One pass; expansions are not re-examined.
pub fn normalize_acronyms(q: &TokenSeq, map: &AcronymMap) -> TokenSeq {
    let mut out = Vec::with_capacity(q.len());
    for tok in q.tokens() {
        match map.get(&tok.surface) {
            Some(exp) => out.extend(TokenSeq::verbatim(exp).tokens().iter().cloned()),
            None => out.push(tok.clone()),
        }
    }
    TokenSeq::new(out)
}
