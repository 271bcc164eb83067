//! Conversion of ⟨question, gold query⟩ pairs into ⟨question, template,
//! tagging⟩ triples.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::kb::{derive_label, TripleStore};
use crate::sparql::{parse_query, Iri, SparqlError, SparqlQuery, Term, TriplePattern, RDF_TYPE};
use crate::text::{tokenize, Preprocessor, TokenSeq};

pub const DEFAULT_ENTITY_NAMESPACE: &str = "http://dbpedia.org/resource/";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    O,
    B,
    I,
}

impl Tag {
    pub const ALL: [Tag; 3] = [Tag::O, Tag::B, Tag::I];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Tag> {
        Self::ALL.get(id).copied()
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::O => "O",
            Tag::B => "B",
            Tag::I => "I",
        })
    }
}

impl FromStr for Tag {
    type Err = QqtError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "O" => Ok(Tag::O),
            "B" => Ok(Tag::B),
            "I" => Ok(Tag::I),
            _ => Err(QqtError::Invalid(format!("unknown tag {s:?}"))),
        }
    }
}

/// True when no `I` follows `O` or the start.
pub fn is_valid_bio(tags: &[Tag]) -> bool {
    let mut prev = Tag::O;
    for &t in tags {
        if t == Tag::I && prev == Tag::O {
            return false;
        }
        prev = t;
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QqtTriple {
    pub question: TokenSeq,
    pub template: Vec<String>,
    pub tagging: Vec<Tag>,
}

impl QqtTriple {
    pub fn validate(&self) -> Result<(), QqtError> {
        if self.tagging.len() != self.question.len() {
            return Err(QqtError::Invalid(format!(
                "{} tags for {} tokens",
                self.tagging.len(),
                self.question.len()
            )));
        }
        if !is_valid_bio(&self.tagging) {
            return Err(QqtError::Invalid("I tag without a preceding B or I".into()));
        }
        let placeholders: BTreeSet<u32> = self
            .template
            .iter()
            .filter_map(|t| t.strip_prefix('$')?.parse().ok())
            .collect();
        let spans = self.tagging.iter().filter(|&&t| t == Tag::B).count() as u32;
        if placeholders != (1..=spans).collect() {
            return Err(QqtError::Invalid(format!(
                "placeholders {placeholders:?} do not match {spans} tagged spans"
            )));
        }
        Ok(())
    }

    /// One QQT file record, without the newline.
    pub fn to_line(&self) -> String {
        let tags: Vec<String> = self.tagging.iter().map(Tag::to_string).collect();
        format!(
            "{}\t{}\t{}",
            self.question.surfaces().join(" "),
            self.template.join(" "),
            tags.join(" ")
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, QqtError> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(QqtError::Invalid(format!("expected 3 fields, found {}", fields.len())));
        }
        let words: Vec<&str> = fields[0].split(' ').filter(|w| !w.is_empty()).collect();
        let triple = Self {
            question: TokenSeq::from_surfaces(&words),
            template: fields[1].split(' ').filter(|w| !w.is_empty()).map(String::from).collect(),
            tagging: fields[2]
                .split(' ')
                .filter(|w| !w.is_empty())
                .map(str::parse)
                .collect::<Result<_, _>>()?,
        };
        triple.validate()?;
        Ok(triple)
    }
}

#[derive(Debug, Error)]
pub enum QqtError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<QqtError>,
    },
    #[error("no question span matches the label of <{iri}>")]
    EntityNotAligned { iri: String },
    #[error("the span for <{iri}> overlaps a longer entity span")]
    OverlappingSpans { iri: String },
    #[error("sparql: {0}")]
    Sparql(#[from] SparqlError),
    #[error("{0}")]
    Invalid(String),
}

/// Where entity labels come from.
pub trait LabelSource {
    fn labels(&self, iri: &str) -> Vec<String>;
}

/// Labels derived from the IRI text alone.
#[derive(Debug, Clone, Copy, Default)]
pub struct DerivedLabels;

impl LabelSource for DerivedLabels {
    fn labels(&self, iri: &str) -> Vec<String> {
        vec![derive_label(iri)]
    }
}

/// `rdfs:label` values from a store, falling back to the derived label.
impl LabelSource for TripleStore {
    fn labels(&self, iri: &str) -> Vec<String> {
        let mut out: Vec<String> = self.labels_of(iri).into_iter().map(|l| l.lexical.clone()).collect();
        out.sort();
        out.dedup();
        if out.is_empty() {
            out.push(derive_label(iri));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Span {
    start: usize,
    len: usize,
}

impl Span {
    fn overlaps(&self, other: &Span) -> bool {
        self.start < other.start + other.len && other.start < self.start + self.len
    }
}

fn occurrences(question: &[&str], label: &[&str]) -> Vec<usize> {
    if label.is_empty() || label.len() > question.len() {
        return Vec::new();
    }
    (0..=question.len() - label.len())
        .filter(|&s| question[s..s + label.len()] == *label)
        .collect()
}

fn fresh_names(taken: &BTreeSet<&str>, n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    let mut k = 1;
    while out.len() < n {
        let name = if k == 1 { "w".to_string() } else { format!("w{k}") };
        if !taken.contains(name.as_str()) {
            out.push(name);
        }
        k += 1;
    }
    out
}

fn is_class_position(p: &TriplePattern, prefixes: &[(String, String)]) -> bool {
    match &p.predicate {
        Term::A => true,
        Term::Iri(i) => i.resolve(prefixes).as_deref() == Some(RDF_TYPE),
        _ => false,
    }
}

/// Replaces aligned entity IRIs of `gold` with variables constrained by
/// `?w rdfs:label $k`, and tags the matching question spans.
pub fn convert_pair(
    question: &TokenSeq,
    gold: &SparqlQuery,
    labels: &dyn LabelSource,
    entity_namespace: &str,
) -> Result<QqtTriple, QqtError> {
    if gold.has_placeholders() {
        return Err(QqtError::Invalid("gold query already contains placeholders".into()));
    }
    let mut entities: Vec<String> = Vec::new();
    for p in &gold.patterns {
        let mut slots = vec![&p.subject];
        if !is_class_position(p, &gold.prefixes) {
            slots.push(&p.object);
        }
        for t in slots {
            if let Term::Iri(i) = t {
                let full = i.resolve(&gold.prefixes).unwrap_or_default();
                if full.starts_with(entity_namespace) && !entities.contains(&full) {
                    entities.push(full);
                }
            }
        }
    }

    let norms: Vec<String> = question.norms().iter().map(|n| n.to_lowercase()).collect();
    let norms: Vec<&str> = norms.iter().map(String::as_str).collect();
    let mut candidates: Vec<(Span, usize)> = Vec::new();
    for (e, iri) in entities.iter().enumerate() {
        let before = candidates.len();
        for label in labels.labels(iri) {
            let label_seq = tokenize(&label);
            let words: Vec<String> = label_seq.norms().iter().map(|n| n.to_lowercase()).collect();
            let words: Vec<&str> = words.iter().map(String::as_str).collect();
            for start in occurrences(&norms, &words) {
                candidates.push((Span { start, len: words.len() }, e));
            }
        }
        if candidates.len() == before {
            return Err(QqtError::EntityNotAligned { iri: iri.clone() });
        }
    }
    candidates.sort_by_key(|(s, e)| (std::cmp::Reverse(s.len), s.start, *e));
    candidates.dedup();
    let mut chosen: BTreeMap<usize, Span> = BTreeMap::new();
    for (span, e) in &candidates {
        if chosen.contains_key(e) || chosen.values().any(|s| s.overlaps(span)) {
            continue;
        }
        chosen.insert(*e, *span);
    }
    if let Some(e) = (0..entities.len()).find(|e| !chosen.contains_key(e)) {
        return Err(QqtError::OverlappingSpans {
            iri: entities[e].clone(),
        });
    }

    let mut order: Vec<(usize, Span)> = chosen.into_iter().collect();
    order.sort_by_key(|(_, s)| s.start);
    let vars = fresh_names(&gold.pattern_vars(), order.len());
    let mut var_of: BTreeMap<&str, &str> = BTreeMap::new();
    let mut tagging = vec![Tag::O; question.len()];
    for ((e, span), var) in order.iter().zip(&vars) {
        var_of.insert(entities[*e].as_str(), var.as_str());
        tagging[span.start] = Tag::B;
        for t in &mut tagging[span.start + 1..span.start + span.len] {
            *t = Tag::I;
        }
    }

    let mut template = gold.clone();
    let replace = |t: &mut Term| {
        if let Term::Iri(i) = t {
            if let Some(v) = i.resolve(&gold.prefixes).and_then(|f| var_of.get(f.as_str()).copied()) {
                *t = Term::var(v);
            }
        }
    };
    for p in &mut template.patterns {
        let class = is_class_position(p, &gold.prefixes);
        replace(&mut p.subject);
        if !class {
            replace(&mut p.object);
        }
    }
    for (k, var) in vars.iter().enumerate() {
        template.patterns.push(TriplePattern::new(
            Term::var(var.as_str()),
            Term::Iri(Iri::prefixed("rdfs", "label")),
            Term::Placeholder(k as u32 + 1),
        ));
    }
    Ok(QqtTriple {
        question: question.clone(),
        template: template.tokens(),
        tagging,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    UnsupportedSyntax,
    EntityNotFound,
    OverlappingSpans,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SkipReason::UnsupportedSyntax => "unsupported",
            SkipReason::EntityNotFound => "entity-not-found",
            SkipReason::OverlappingSpans => "overlapping-spans",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub reason: SkipReason,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConversionReport {
    pub converted: usize,
    pub skipped: usize,
    pub diagnostics: Vec<Diagnostic>,
}

/// One `question<TAB>sparql` record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub line: usize,
    pub question: String,
    pub sparql: String,
}

pub fn read_pairs<R: BufRead>(reader: R) -> Result<Vec<Pair>, QqtError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (question, sparql) = line.split_once('\t').ok_or_else(|| QqtError::Line {
            line: i + 1,
            source: Box::new(QqtError::Invalid("expected question<TAB>sparql".into())),
        })?;
        out.push(Pair {
            line: i + 1,
            question: question.to_string(),
            sparql: sparql.to_string(),
        });
    }
    Ok(out)
}

pub fn read_qqt<R: BufRead>(reader: R) -> Result<Vec<QqtTriple>, QqtError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(QqtTriple::parse_line(&line).map_err(|e| QqtError::Line {
            line: i + 1,
            source: Box::new(e),
        })?);
    }
    Ok(out)
}

pub fn write_qqt<W: Write>(mut out: W, triples: &[QqtTriple]) -> Result<(), QqtError> {
    for t in triples {
        writeln!(out, "{}", t.to_line())?;
    }
    Ok(())
}

/// Converts every pair, skipping those that cannot be aligned or use
/// unsupported syntax. Malformed SPARQL aborts with its line.
pub fn convert_dataset(
    pairs: &[Pair],
    labels: &dyn LabelSource,
    prep: &Preprocessor,
    entity_namespace: &str,
) -> Result<(Vec<QqtTriple>, ConversionReport), QqtError> {
    let mut triples = Vec::new();
    let mut report = ConversionReport::default();
    for pair in pairs {
        let skip = |reason, detail: String| Diagnostic {
            line: pair.line,
            reason,
            detail,
        };
        let gold = match parse_query(&pair.sparql) {
            Ok(q) => q,
            Err(e @ SparqlError::Unsupported { .. }) => {
                report.skipped += 1;
                report.diagnostics.push(skip(SkipReason::UnsupportedSyntax, e.to_string()));
                continue;
            }
            Err(e) => {
                return Err(QqtError::Line {
                    line: pair.line,
                    source: Box::new(e.into()),
                })
            }
        };
        let question = prep.run(&pair.question);
        match convert_pair(&question, &gold, labels, entity_namespace) {
            Ok(t) => {
                report.converted += 1;
                triples.push(t);
            }
            Err(e @ QqtError::EntityNotAligned { .. }) => {
                report.skipped += 1;
                report.diagnostics.push(skip(SkipReason::EntityNotFound, e.to_string()));
            }
            Err(e @ QqtError::OverlappingSpans { .. }) => {
                report.skipped += 1;
                report.diagnostics.push(skip(SkipReason::OverlappingSpans, e.to_string()));
            }
            Err(e) => {
                return Err(QqtError::Line {
                    line: pair.line,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok((triples, report))
}
