//! The supported SPARQL subset: AST, parser and canonical serializer.
//!
//! Templates are ordinary queries whose terms may include `$k` placeholders.

mod ast;
mod parser;

pub use ast::{
    builtin_prefix, Direction, Iri, Literal, OrderBy, Projection, QueryForm, SparqlQuery, Term,
    TriplePattern, BUILTIN_PREFIXES, RDFS_LABEL, RDF_TYPE,
};
pub use parser::parse_query;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SparqlError {
    #[error("unsupported syntax {construct} at byte {offset}")]
    Unsupported { construct: String, offset: usize },
    #[error("parse error at byte {offset}: {message}")]
    Parse { message: String, offset: usize },
    #[error("undeclared prefix {prefix:?} at byte {offset}")]
    UnknownPrefix { prefix: String, offset: usize },
    #[error("invalid query: {0}")]
    Invalid(String),
}

/// Canonical single-spaced rendering.
pub fn serialize_query(q: &SparqlQuery) -> String {
    q.to_string()
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn serializes_italy_literal() {
        let q = parse_query(
            r#"SELECT DISTINCT ?uri WHERE { ?uri a dbo:Film ; dbo:country ?v . ?v rdfs:label "Italy"@en }"#,
        )
        .unwrap();
        let text = serialize_query(&q);
        assert!(text.contains(r#""Italy"@en"#));
        assert_eq!(
            text,
            r#"SELECT DISTINCT ?uri WHERE { ?uri a dbo:Film . ?uri dbo:country ?v . ?v rdfs:label "Italy"@en }"#
        );
    }

    #[test]
    fn ask_rendering() {
        let q = parse_query("ask { dbr:Paris dbo:country dbr:France }").unwrap();
        assert!(serialize_query(&q).starts_with("ASK WHERE {"));
    }

    #[test]
    fn author_query_round_trip() {
        let q = parse_query("select ?a where { dbr:Mona_Lisa dbo:author ?a }").unwrap();
        assert_eq!(parse_query(&serialize_query(&q)).unwrap(), q);
        assert_eq!(
            q.tokens(),
            ["SELECT", "?a", "WHERE", "{", "dbr:Mona_Lisa", "dbo:author", "?a", "}"]
        );
    }

    proptest! {
        #[test]
        fn round_trip(q in strategy::query()) {
            q.validate().unwrap();
            let text = serialize_query(&q);
            let back = parse_query(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
            prop_assert_eq!(&back, &q);
            prop_assert_eq!(serialize_query(&back), text);
        }
    }
}
