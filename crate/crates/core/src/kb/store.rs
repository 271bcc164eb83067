use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use super::KbError;
use crate::sparql::{Literal, RDFS_LABEL};

/// A ground RDF term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Iri(String),
    Literal(Literal),
}

impl Node {
    pub fn iri(s: impl Into<String>) -> Self {
        Node::Iri(s.into())
    }

    pub fn literal(lexical: impl Into<String>, lang: Option<&str>) -> Self {
        Node::Literal(Literal {
            lexical: lexical.into(),
            lang: lang.map(str::to_string),
        })
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Node::Iri(s) => Some(s),
            Node::Literal(_) => None,
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Iri(s) => write!(f, "<{s}>"),
            Node::Literal(l) => l.fmt(f),
        }
    }
}

pub type NodeId = u32;

/// In-memory triple set with subject, predicate, object and label indexes.
#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    nodes: Vec<Node>,
    ids: HashMap<Node, NodeId>,
    triples: Vec<[NodeId; 3]>,
    seen: HashSet<[NodeId; 3]>,
    by_s: HashMap<NodeId, Vec<usize>>,
    by_p: HashMap<NodeId, Vec<usize>>,
    by_o: HashMap<NodeId, Vec<usize>>,
    labels: HashMap<String, BTreeSet<String>>,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    fn intern(&mut self, n: Node) -> NodeId {
        if let Some(&id) = self.ids.get(&n) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(n.clone());
        self.ids.insert(n, id);
        id
    }

    /// Adds a triple; returns `false` for a duplicate. Subjects and
    /// predicates must be IRIs.
    pub fn insert(&mut self, s: Node, p: Node, o: Node) -> Result<bool, KbError> {
        if s.as_iri().is_none() || p.as_iri().is_none() {
            return Err(KbError::Invalid("subject and predicate must be IRIs".into()));
        }
        let label = match (&p, &o) {
            (Node::Iri(pi), Node::Literal(l)) if pi == RDFS_LABEL => Some(l.lexical.to_lowercase()),
            _ => None,
        };
        let subject_iri = s.as_iri().map(str::to_string);
        let key = [self.intern(s), self.intern(p), self.intern(o)];
        if !self.seen.insert(key) {
            return Ok(false);
        }
        let idx = self.triples.len();
        self.triples.push(key);
        self.by_s.entry(key[0]).or_default().push(idx);
        self.by_p.entry(key[1]).or_default().push(idx);
        self.by_o.entry(key[2]).or_default().push(idx);
        if let (Some(label), Some(iri)) = (label, subject_iri) {
            self.labels.entry(label).or_default().insert(iri);
        }
        Ok(true)
    }

    pub fn id(&self, n: &Node) -> Option<NodeId> {
        self.ids.get(n).copied()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triple_ids(&self) -> &[[NodeId; 3]] {
        &self.triples
    }

    pub fn contains_ids(&self, t: [NodeId; 3]) -> bool {
        self.seen.contains(&t)
    }

    pub fn contains(&self, s: &Node, p: &Node, o: &Node) -> bool {
        match (self.id(s), self.id(p), self.id(o)) {
            (Some(a), Some(b), Some(c)) => self.seen.contains(&[a, b, c]),
            _ => false,
        }
    }

    pub fn triples(&self) -> impl Iterator<Item = (&Node, &Node, &Node)> + '_ {
        self.triples
            .iter()
            .map(|[s, p, o]| (self.node(*s), self.node(*p), self.node(*o)))
    }

    pub(crate) fn index(&self, position: usize, id: NodeId) -> &[usize] {
        let map = match position {
            0 => &self.by_s,
            1 => &self.by_p,
            _ => &self.by_o,
        };
        map.get(&id).map_or(&[], Vec::as_slice)
    }

    /// Subjects whose `rdfs:label` lowercases to `label.to_lowercase()`.
    pub fn subjects_with_label(&self, label: &str) -> Option<&BTreeSet<String>> {
        self.labels.get(&label.to_lowercase())
    }

    /// `rdfs:label` values of `iri`, in insertion order.
    pub fn labels_of(&self, iri: &str) -> Vec<&Literal> {
        let (Some(s), Some(p)) = (
            self.id(&Node::iri(iri)),
            self.id(&Node::iri(RDFS_LABEL)),
        ) else {
            return Vec::new();
        };
        self.index(0, s)
            .iter()
            .map(|&i| self.triples[i])
            .filter(|t| t[1] == p)
            .filter_map(|t| match self.node(t[2]) {
                Node::Literal(l) => Some(l),
                Node::Iri(_) => None,
            })
            .collect()
    }

    pub fn load_ntriples(path: &Path) -> Result<Self, KbError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_ntriples(&text)
    }

    pub fn parse_ntriples(text: &str) -> Result<Self, KbError> {
        let mut store = Self::new();
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (s, p, o) = parse_line(trimmed).map_err(|message| KbError::Load {
                line: idx + 1,
                message,
            })?;
            store.insert(s, p, o).map_err(|e| KbError::Load {
                line: idx + 1,
                message: e.to_string(),
            })?;
        }
        Ok(store)
    }

    /// N-Triples rendering, one line per triple in insertion order.
    pub fn to_ntriples(&self) -> String {
        let mut out = String::new();
        for (s, p, o) in self.triples() {
            out.push_str(&format!("{} {} {} .\n", s, p, nt_node(o)));
        }
        out
    }
}

fn nt_node(n: &Node) -> String {
    match n {
        Node::Iri(s) => format!("<{s}>"),
        Node::Literal(l) => {
            let mut s = String::from("\"");
            for c in l.lexical.chars() {
                match c {
                    '"' => s.push_str("\\\""),
                    '\\' => s.push_str("\\\\"),
                    '\n' => s.push_str("\\n"),
                    '\r' => s.push_str("\\r"),
                    '\t' => s.push_str("\\t"),
                    c => s.push(c),
                }
            }
            s.push('"');
            if let Some(lang) = &l.lang {
                s.push('@');
                s.push_str(lang);
            }
            s
        }
    }
}

struct Cursor<'a> {
    s: &'a str,
    i: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.s[self.i..].starts_with([' ', '\t']) {
            self.i += 1;
        }
    }

    fn iri(&mut self) -> Result<String, String> {
        self.skip_ws();
        if !self.s[self.i..].starts_with('<') {
            return Err(format!("expected <iri> at column {}", self.i + 1));
        }
        let rest = &self.s[self.i + 1..];
        let end = rest
            .find('>')
            .ok_or_else(|| format!("unterminated IRI at column {}", self.i + 1))?;
        let iri = &rest[..end];
        if iri.is_empty() || iri.contains(char::is_whitespace) {
            return Err(format!("invalid IRI at column {}", self.i + 1));
        }
        self.i += end + 2;
        Ok(iri.to_string())
    }

    fn object(&mut self) -> Result<Node, String> {
        self.skip_ws();
        let rest = &self.s[self.i..];
        if rest.starts_with('<') {
            return self.iri().map(Node::Iri);
        }
        if rest.starts_with("_:") {
            return Err("blank nodes are not supported".into());
        }
        if !rest.starts_with('"') {
            return Err(format!("expected object at column {}", self.i + 1));
        }
        let mut lexical = String::new();
        let mut chars = rest[1..].char_indices();
        let close = loop {
            let Some((k, c)) = chars.next() else {
                return Err("unterminated literal".into());
            };
            match c {
                '"' => break k,
                '\\' => {
                    let (_, e) = chars.next().ok_or("dangling escape")?;
                    match e {
                        'n' => lexical.push('\n'),
                        't' => lexical.push('\t'),
                        'r' => lexical.push('\r'),
                        '"' | '\\' | '\'' => lexical.push(e),
                        'u' | 'U' => {
                            let n = if e == 'u' { 4 } else { 8 };
                            let hex: String = (0..n).filter_map(|_| chars.next().map(|x| x.1)).collect();
                            let cp = u32::from_str_radix(&hex, 16)
                                .ok()
                                .and_then(char::from_u32)
                                .ok_or("bad unicode escape")?;
                            lexical.push(cp);
                        }
                        _ => return Err(format!("unknown escape \\{e}")),
                    }
                }
                c => lexical.push(c),
            }
        };
        self.i += close + 2;
        let rest = &self.s[self.i..];
        if let Some(tag) = rest.strip_prefix('@') {
            let len = tag
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
                .unwrap_or(tag.len());
            if len == 0 {
                return Err("empty language tag".into());
            }
            self.i += 1 + len;
            return Ok(Node::literal(lexical, Some(&tag[..len])));
        }
        if rest.starts_with("^^") {
            return Err("datatyped literals are not supported".into());
        }
        Ok(Node::literal(lexical, None))
    }
}

fn parse_line(line: &str) -> Result<(Node, Node, Node), String> {
    let mut c = Cursor { s: line, i: 0 };
    let s = Node::Iri(c.iri()?);
    let p = Node::Iri(c.iri()?);
    let o = c.object()?;
    c.skip_ws();
    let rest = c.s[c.i..].trim_end();
    let rest = rest
        .strip_prefix('.')
        .ok_or_else(|| "missing terminal `.`".to_string())?;
    let rest = rest.trim_start();
    if !(rest.is_empty() || rest.starts_with('#')) {
        return Err("trailing content after `.`".into());
    }
    Ok((s, p, o))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "<http://x/a> <http://x/p> <http://x/b> .\n<http://x/a> <http://www.w3.org/2000/01/rdf-schema#label> \"Mona Lisa\"@en .\n";

    #[test]
    fn counts_and_dedup() {
        let s = TripleStore::parse_ntriples(TWO).unwrap();
        assert_eq!(s.len(), 2);
        let dup = format!("{TWO}{TWO}");
        assert_eq!(TripleStore::parse_ntriples(&dup).unwrap().len(), 2);
        assert!(TripleStore::parse_ntriples("").unwrap().is_empty());
        assert!(TripleStore::parse_ntriples("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn missing_dot_reports_line() {
        let text = format!("{TWO}<http://x/a> <http://x/p> <http://x/c>\n");
        match TripleStore::parse_ntriples(&text) {
            Err(KbError::Load { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_lines() {
        for bad in [
            "<http://x/a> <http://x/p> .",
            "_:b <http://x/p> <http://x/c> .",
            "<http://x/a> <http://x/p> _:b .",
            "<http://x/a> <http://x/p> \"x\"^^<http://www.w3.org/2001/XMLSchema#int> .",
            "<http://x/a> <http://x/p> \"unterminated .",
            "<http://x/a> <http://x/p> <http://x/c> . extra",
            "<http://x/a> \"p\" <http://x/c> .",
        ] {
            assert!(
                matches!(TripleStore::parse_ntriples(bad), Err(KbError::Load { line: 1, .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn label_index() {
        let s = TripleStore::parse_ntriples(TWO).unwrap();
        let subjects = s.subjects_with_label("MONA lisa").unwrap();
        assert!(subjects.contains("http://x/a"));
        assert_eq!(s.labels_of("http://x/a")[0].lexical, "Mona Lisa");
        assert!(s.labels_of("http://x/zzz").is_empty());
    }

    #[test]
    fn escapes_round_trip() {
        let text = "<http://x/a> <http://x/p> \"say \\\"hi\\\"\\n\\u00e9\" .\n";
        let s = TripleStore::parse_ntriples(text).unwrap();
        let (_, _, o) = s.triples().next().unwrap();
        assert_eq!(o, &Node::literal("say \"hi\"\né", None));
        let again = TripleStore::parse_ntriples(&s.to_ntriples()).unwrap();
        assert_eq!(again.to_ntriples(), s.to_ntriples());
    }
}
