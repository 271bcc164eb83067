//! Embedded triple store: N-Triples loading, basic-graph-pattern evaluation
//! and label utilities.

mod exec;
mod label;
mod store;

pub use exec::{execute_query, AnswerItem, AnswerSet};
pub use label::derive_label;
pub use store::{Node, NodeId, TripleStore};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Load { line: usize, message: String },
    #[error("query still contains placeholders")]
    TemplateNotAssembled,
    #[error("{0}")]
    Invalid(String),
}
