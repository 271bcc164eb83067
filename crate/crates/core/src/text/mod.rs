//! Question preparation: acronym expansion, entity linking, tokenization
//! and word embeddings.

mod acronyms;
mod embedding;
mod linking;
pub mod spotlight;
mod tokenize;

pub use acronyms::{normalize_acronyms, AcronymMap};
pub use embedding::{
    embed_sequence, EmbeddingGrad, EmbeddingTable, DEFAULT_BUCKETS, MAX_NGRAM, MIN_NGRAM,
};
pub use linking::{link_entities, similarity, Gazetteer, DEFAULT_THRESHOLD};
pub use tokenize::{tokenize, Token, TokenSeq};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed {what} line {line}")]
    Format { what: &'static str, line: usize },
    #[error("acronym {0:?} would expand into another acronym")]
    AcronymCycle(String),
    #[error("embedding dimension mismatch at line {line}: expected {expected}, found {found}")]
    Dimension {
        expected: usize,
        found: usize,
        line: usize,
    },
    #[error("bucket count {0} is not a power of two")]
    Buckets(u32),
    #[error("similarity threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error("empty label or alias")]
    EmptyLabel,
    #[error("remote linker: {0}")]
    Remote(String),
}

/// The question-side pipeline with ablation switches: acronyms, then
/// linking, on a tokenized question.
#[derive(Debug, Clone, Default)]
pub struct Preprocessor {
    pub acronyms: Option<AcronymMap>,
    pub gazetteer: Option<Gazetteer>,
}

impl Preprocessor {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn run(&self, text: &str) -> TokenSeq {
        self.apply(&tokenize(text))
    }

    pub fn apply(&self, q: &TokenSeq) -> TokenSeq {
        let q = match &self.acronyms {
            Some(map) => normalize_acronyms(q, map),
            None => q.clone(),
        };
        match &self.gazetteer {
            Some(g) => link_entities(&q, g),
            None => q,
        }
    }
}
