use std::collections::BTreeSet;
use std::fmt;

use super::SparqlError;

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";

/// Prefixes usable without a `PREFIX` declaration.
pub const BUILTIN_PREFIXES: &[(&str, &str)] = &[
    ("dbr", "http://dbpedia.org/resource/"),
    ("dbo", "http://dbpedia.org/ontology/"),
    ("dbp", "http://dbpedia.org/property/"),
    ("rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
    ("rdfs", "http://www.w3.org/2000/01/rdf-schema#"),
    ("xsd", "http://www.w3.org/2001/XMLSchema#"),
];

pub fn builtin_prefix(prefix: &str) -> Option<&'static str> {
    BUILTIN_PREFIXES
        .iter()
        .find(|(p, _)| *p == prefix)
        .map(|(_, iri)| *iri)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Iri {
    Full(String),
    Prefixed { prefix: String, local: String },
}

impl Iri {
    pub fn full(iri: impl Into<String>) -> Self {
        Iri::Full(iri.into())
    }

    pub fn prefixed(prefix: impl Into<String>, local: impl Into<String>) -> Self {
        Iri::Prefixed {
            prefix: prefix.into(),
            local: local.into(),
        }
    }

    /// Absolute form, using `declared` first and the built-ins second.
    pub fn resolve(&self, declared: &[(String, String)]) -> Option<String> {
        match self {
            Iri::Full(s) => Some(s.clone()),
            Iri::Prefixed { prefix, local } => declared
                .iter()
                .rev()
                .find(|(p, _)| p == prefix)
                .map(|(_, ns)| ns.as_str())
                .or_else(|| builtin_prefix(prefix))
                .map(|ns| format!("{ns}{local}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub lexical: String,
    pub lang: Option<String>,
}

impl Literal {
    pub fn plain(lexical: impl Into<String>) -> Self {
        Self {
            lexical: lexical.into(),
            lang: None,
        }
    }

    pub fn lang(lexical: impl Into<String>, lang: impl Into<String>) -> Self {
        Self {
            lexical: lexical.into(),
            lang: Some(lang.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(Iri),
    Var(String),
    Literal(Literal),
    /// `$k`, k ≥ 1
    Placeholder(u32),
    /// The `a` keyword
    A,
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl TriplePattern {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Self {
        Self {
            subject,
            predicate,
            object,
        }
    }

    pub fn terms(&self) -> [&Term; 3] {
        [&self.subject, &self.predicate, &self.object]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryForm {
    Select,
    Ask,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Projection {
    Vars(Vec<String>),
    Count {
        var: String,
        distinct: bool,
        alias: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OrderBy {
    pub var: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SparqlQuery {
    pub prefixes: Vec<(String, String)>,
    pub form: QueryForm,
    pub distinct: bool,
    pub projection: Projection,
    pub patterns: Vec<TriplePattern>,
    pub order: Option<OrderBy>,
    pub limit: Option<u64>,
    pub offset: Option<u64>,
}

impl SparqlQuery {
    pub fn select(vars: &[&str], patterns: Vec<TriplePattern>) -> Self {
        Self {
            prefixes: Vec::new(),
            form: QueryForm::Select,
            distinct: false,
            projection: Projection::Vars(vars.iter().map(|v| v.to_string()).collect()),
            patterns,
            order: None,
            limit: None,
            offset: None,
        }
    }

    pub fn ask(patterns: Vec<TriplePattern>) -> Self {
        Self {
            form: QueryForm::Ask,
            projection: Projection::Vars(Vec::new()),
            ..Self::select(&[], patterns)
        }
    }

    pub fn pattern_vars(&self) -> BTreeSet<&str> {
        self.patterns
            .iter()
            .flat_map(|p| p.terms())
            .filter_map(Term::as_var)
            .collect()
    }

    /// Distinct placeholder indices, ascending.
    pub fn placeholders(&self) -> BTreeSet<u32> {
        self.patterns
            .iter()
            .flat_map(|p| p.terms())
            .filter_map(|t| match t {
                Term::Placeholder(k) => Some(*k),
                _ => None,
            })
            .collect()
    }

    pub fn has_placeholders(&self) -> bool {
        !self.placeholders().is_empty()
    }

    /// Checks the structural invariants of a query value.
    pub fn validate(&self) -> Result<(), SparqlError> {
        let vars = self.pattern_vars();
        let invalid = |m: String| Err(SparqlError::Invalid(m));
        match (&self.form, &self.projection) {
            (QueryForm::Ask, Projection::Vars(v)) if v.is_empty() => {}
            (QueryForm::Ask, _) => return invalid("ASK takes no projection".into()),
            (QueryForm::Select, Projection::Vars(v)) => {
                if v.is_empty() {
                    return invalid("SELECT needs at least one variable".into());
                }
                if let Some(missing) = v.iter().find(|x| !vars.contains(x.as_str())) {
                    return invalid(format!("projected ?{missing} does not occur in the pattern"));
                }
            }
            (QueryForm::Select, Projection::Count { var, .. }) => {
                if !vars.contains(var.as_str()) {
                    return invalid(format!("counted ?{var} does not occur in the pattern"));
                }
            }
        }
        if let Some(order) = &self.order {
            if !vars.contains(order.var.as_str()) {
                return invalid(format!("ORDER BY ?{} does not occur in the pattern", order.var));
            }
        }
        for p in &self.patterns {
            if matches!(p.predicate, Term::Placeholder(_) | Term::Literal(_)) {
                return invalid("predicate must be an IRI, a variable or `a`".into());
            }
            if matches!(p.subject, Term::A | Term::Literal(_)) || matches!(p.object, Term::A) {
                return invalid("`a` and literals are restricted to their positions".into());
            }
            for t in p.terms() {
                match t {
                    Term::Placeholder(0) => return invalid("placeholder index must be ≥ 1".into()),
                    Term::Literal(Literal { lang: Some(l), .. }) if l.is_empty() => {
                        return invalid("empty language tag".into())
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Whitespace-delimited tokens of the canonical rendering.
    pub fn tokens(&self) -> Vec<String> {
        self.to_string().split(' ').map(str::to_string).collect()
    }
}

fn write_local(f: &mut fmt::Formatter<'_>, local: &str) -> fmt::Result {
    let n = local.chars().count();
    for (i, c) in local.chars().enumerate() {
        let plain = c.is_alphanumeric() || matches!(c, '_' | '-' | '%' | ':') || (c == '.' && i + 1 < n && i > 0);
        if !plain {
            f.write_str("\\")?;
        }
        write!(f, "{c}")?;
    }
    Ok(())
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Iri::Full(s) => write!(f, "<{s}>"),
            Iri::Prefixed { prefix, local } => {
                write!(f, "{prefix}:")?;
                write_local(f, local)
            }
        }
    }
}

pub(crate) fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{}\"", escape_literal(&self.lexical))?;
        if let Some(lang) = &self.lang {
            write!(f, "@{lang}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(i) => i.fmt(f),
            Term::Var(v) => write!(f, "?{v}"),
            Term::Literal(l) => l.fmt(f),
            Term::Placeholder(k) => write!(f, "${k}"),
            Term::A => f.write_str("a"),
        }
    }
}

impl fmt::Display for SparqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (p, iri) in &self.prefixes {
            write!(f, "PREFIX {p}: <{iri}> ")?;
        }
        match self.form {
            QueryForm::Ask => f.write_str("ASK")?,
            QueryForm::Select => {
                f.write_str("SELECT")?;
                if self.distinct {
                    f.write_str(" DISTINCT")?;
                }
                match &self.projection {
                    Projection::Vars(vs) => {
                        for v in vs {
                            write!(f, " ?{v}")?;
                        }
                    }
                    Projection::Count {
                        var,
                        distinct,
                        alias,
                    } => {
                        let inner = if *distinct { "DISTINCT " } else { "" };
                        match alias {
                            Some(a) => write!(f, " ( COUNT ( {inner}?{var} ) AS ?{a} )")?,
                            None => write!(f, " COUNT ( {inner}?{var} )")?,
                        }
                    }
                }
            }
        }
        f.write_str(" WHERE {")?;
        for (i, p) in self.patterns.iter().enumerate() {
            if i > 0 {
                f.write_str(" .")?;
            }
            write!(f, " {} {} {}", p.subject, p.predicate, p.object)?;
        }
        f.write_str(" }")?;
        if let Some(o) = &self.order {
            let dir = match o.direction {
                Direction::Asc => "ASC",
                Direction::Desc => "DESC",
            };
            write!(f, " ORDER BY {dir} ( ?{} )", o.var)?;
        }
        if let Some(l) = self.limit {
            write!(f, " LIMIT {l}")?;
        }
        if let Some(o) = self.offset {
            write!(f, " OFFSET {o}")?;
        }
        Ok(())
    }
}
