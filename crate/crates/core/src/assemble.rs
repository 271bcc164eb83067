//! Filling a predicted template with the entities found by the tagger.

use thiserror::Error;

use crate::qqt::Tag;
use crate::sparql::{parse_query, Literal, SparqlError, SparqlQuery, Term};
use crate::text::TokenSeq;

pub const DEFAULT_LANG: &str = "en";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssembleError {
    #[error("template has no entity for placeholder ${0}")]
    MissingEntity(u32),
    #[error("malformed template: {0}")]
    MalformedTemplate(SparqlError),
    #[error("{tags} tags for {tokens} tokens")]
    LengthMismatch { tokens: usize, tags: usize },
}

/// Non-fatal outcome of assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssembleWarning {
    /// More entities were tagged than the template uses.
    UnusedEntities { used: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub query: SparqlQuery,
    pub warning: Option<AssembleWarning>,
}

/// Each maximal `B I*` run, joined by spaces from the original surfaces.
/// An `I` that follows `O` or the start opens a new entity.
pub fn extract_entities(q: &TokenSeq, tags: &[Tag]) -> Result<Vec<String>, AssembleError> {
    if q.len() != tags.len() {
        return Err(AssembleError::LengthMismatch {
            tokens: q.len(),
            tags: tags.len(),
        });
    }
    let mut out: Vec<Vec<&str>> = Vec::new();
    let mut prev = Tag::O;
    for (tok, &tag) in q.tokens().iter().zip(tags) {
        match tag {
            Tag::O => {}
            Tag::I if prev != Tag::O => out.last_mut().expect("open span").push(&tok.surface),
            _ => out.push(vec![&tok.surface]),
        }
        prev = tag;
    }
    Ok(out.into_iter().map(|words| words.join(" ")).collect())
}

/// Replaces `$k` with the `k`-th entity as a literal tagged `lang`.
pub fn assemble_query(
    template: &[String],
    entities: &[String],
    lang: &str,
) -> Result<Assembled, AssembleError> {
    let mut query = parse_query(&template.join(" ")).map_err(AssembleError::MalformedTemplate)?;
    let placeholders = query.placeholders();
    if let Some(k) = placeholders.iter().find(|&&k| k as usize > entities.len()) {
        return Err(AssembleError::MissingEntity(*k));
    }
    for p in &mut query.patterns {
        for t in [&mut p.subject, &mut p.predicate, &mut p.object] {
            if let Term::Placeholder(k) = t {
                *t = Term::Literal(Literal::lang(entities[*k as usize - 1].clone(), lang));
            }
        }
    }
    query
        .validate()
        .map_err(AssembleError::MalformedTemplate)?;
    let used = placeholders.len();
    let warning = (used < entities.len()).then_some(AssembleWarning::UnusedEntities {
        used,
        found: entities.len(),
    });
    Ok(Assembled { query, warning })
}
