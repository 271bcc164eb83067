use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use super::store::{Node, NodeId, TripleStore};
use super::KbError;
use crate::sparql::{Direction, Iri, Projection, QueryForm, SparqlQuery, Term, RDFS_LABEL, RDF_TYPE};

/// Result of running a query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnswerSet {
    /// Distinct rows; each row is aligned with `vars`.
    Bindings { vars: Vec<String>, rows: Vec<Vec<Node>> },
    Boolean(bool),
    Count(u64),
}

/// An element of an answer set, independent of variable names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnswerItem {
    Row(Vec<Node>),
    Bool(bool),
    Count(u64),
}

impl AnswerSet {
    /// The answers as a set; booleans and counts become singletons.
    pub fn items(&self) -> BTreeSet<AnswerItem> {
        match self {
            AnswerSet::Bindings { rows, .. } => rows.iter().cloned().map(AnswerItem::Row).collect(),
            AnswerSet::Boolean(b) => BTreeSet::from([AnswerItem::Bool(*b)]),
            AnswerSet::Count(n) => BTreeSet::from([AnswerItem::Count(*n)]),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnswerSet::Bindings { rows, .. } => rows.len(),
            _ => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One position of a compiled pattern.
#[derive(Debug, Clone)]
enum Slot {
    /// Any of these ids (usually one; more for tag-insensitive labels).
    Const(Vec<NodeId>),
    Var(usize),
}

fn compile(
    q: &SparqlQuery,
    store: &TripleStore,
    vars: &mut Vec<String>,
) -> Result<Option<Vec<[Slot; 3]>>, KbError> {
    let mut var_index: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::with_capacity(q.patterns.len());
    let mut satisfiable = true;
    for p in &q.patterns {
        let label_predicate = match &p.predicate {
            Term::Iri(iri) => iri.resolve(&q.prefixes).as_deref() == Some(RDFS_LABEL),
            _ => false,
        };
        let mut slots: Vec<Slot> = Vec::with_capacity(3);
        for (pos, term) in p.terms().into_iter().enumerate() {
            let slot = match term {
                Term::Var(v) => {
                    let next = var_index.len();
                    let idx = *var_index.entry(v.clone()).or_insert_with(|| {
                        vars.push(v.clone());
                        next
                    });
                    Slot::Var(idx)
                }
                Term::Placeholder(_) => return Err(KbError::TemplateNotAssembled),
                Term::A => Slot::Const(store.id(&Node::iri(RDF_TYPE)).into_iter().collect()),
                Term::Iri(iri) => {
                    let full = resolve(iri, q)?;
                    Slot::Const(store.id(&Node::Iri(full)).into_iter().collect())
                }
                Term::Literal(lit) => {
                    let mut ids: Vec<NodeId> =
                        store.id(&Node::Literal(lit.clone())).into_iter().collect();
                    if pos == 2 && label_predicate && lit.lang.is_some() {
                        ids.extend(store.id(&Node::literal(lit.lexical.clone(), None)));
                    }
                    Slot::Const(ids)
                }
            };
            if matches!(&slot, Slot::Const(ids) if ids.is_empty()) {
                satisfiable = false;
            }
            slots.push(slot);
        }
        let [s, p, o]: [Slot; 3] = slots.try_into().expect("three slots");
        out.push([s, p, o]);
    }
    Ok(satisfiable.then_some(out))
}

fn resolve(iri: &Iri, q: &SparqlQuery) -> Result<String, KbError> {
    iri.resolve(&q.prefixes)
        .ok_or_else(|| KbError::Invalid(format!("unresolvable IRI {iri}")))
}

struct Solver<'a> {
    store: &'a TripleStore,
    patterns: &'a [[Slot; 3]],
    stop_at_first: bool,
    solutions: Vec<Vec<NodeId>>,
}

impl<'a> Solver<'a> {
    fn candidates(&self, pattern: &[Slot; 3], binding: &[Option<NodeId>]) -> Option<&'a [usize]> {
        let store: &'a TripleStore = self.store;
        let mut best: Option<&'a [usize]> = None;
        for (pos, slot) in pattern.iter().enumerate() {
            let id = match slot {
                Slot::Const(ids) if ids.len() == 1 => Some(ids[0]),
                Slot::Var(v) => binding[*v],
                Slot::Const(_) => None,
            };
            if let Some(id) = id {
                let list = store.index(pos, id);
                if best.is_none_or(|b| list.len() < b.len()) {
                    best = Some(list);
                }
            }
        }
        best
    }

    fn matches(&self, pattern: &[Slot; 3], triple: [NodeId; 3], binding: &mut [Option<NodeId>], fresh: &mut Vec<usize>) -> bool {
        for (slot, &id) in pattern.iter().zip(&triple) {
            match slot {
                Slot::Const(ids) => {
                    if !ids.contains(&id) {
                        return false;
                    }
                }
                Slot::Var(v) => match binding[*v] {
                    Some(b) if b != id => return false,
                    Some(_) => {}
                    None => {
                        binding[*v] = Some(id);
                        fresh.push(*v);
                    }
                },
            }
        }
        true
    }

    fn solve(&mut self, done: &mut [bool], binding: &mut Vec<Option<NodeId>>) -> bool {
        // most selective remaining pattern under the current binding
        let patterns: &'a [[Slot; 3]] = self.patterns;
        let mut pick: Option<(usize, Option<&'a [usize]>)> = None;
        for (i, p) in patterns.iter().enumerate() {
            if done[i] {
                continue;
            }
            let c = self.candidates(p, binding);
            let size = c.map_or(usize::MAX, <[usize]>::len);
            if pick.is_none_or(|(_, b)| size < b.map_or(usize::MAX, <[usize]>::len)) {
                pick = Some((i, c));
            }
        }
        let Some((i, list)) = pick else {
            self.solutions.push(binding.iter().map(|b| b.expect("all variables bound")).collect());
            return self.stop_at_first;
        };
        let all: Vec<usize>;
        let list = match list {
            Some(l) => l,
            None => {
                all = (0..self.store.len()).collect();
                &all
            }
        };
        done[i] = true;
        let mut fresh = Vec::new();
        for &t in list {
            let triple = self.store.triple_ids()[t];
            fresh.clear();
            if self.matches(&patterns[i], triple, binding, &mut fresh) && self.solve(done, binding) {
                return true;
            }
            for &v in &fresh {
                binding[v] = None;
            }
        }
        done[i] = false;
        false
    }
}

fn numeric(n: &Node) -> Option<f64> {
    match n {
        Node::Literal(l) => l.lexical.trim().parse::<f64>().ok().filter(|v| v.is_finite()),
        Node::Iri(_) => None,
    }
}

fn order_key(a: &Node, b: &Node) -> Ordering {
    match (numeric(a), numeric(b)) {
        (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
        _ => a.to_string().cmp(&b.to_string()),
    }
}

/// Evaluates a query under set semantics.
pub fn execute_query(q: &SparqlQuery, store: &TripleStore) -> Result<AnswerSet, KbError> {
    if q.has_placeholders() {
        return Err(KbError::TemplateNotAssembled);
    }
    let mut vars = Vec::new();
    let compiled = compile(q, store, &mut vars)?;
    let var_pos = |name: &str| vars.iter().position(|v| v == name);

    let solutions = match &compiled {
        None => Vec::new(),
        Some(patterns) => {
            let mut solver = Solver {
                store,
                patterns,
                stop_at_first: q.form == QueryForm::Ask,
                solutions: Vec::new(),
            };
            let mut done = vec![false; patterns.len()];
            let mut binding = vec![None; vars.len()];
            solver.solve(&mut done, &mut binding);
            solver.solutions
        }
    };

    if q.form == QueryForm::Ask {
        return Ok(AnswerSet::Boolean(!solutions.is_empty()));
    }
    let project = |names: &[String]| -> Result<Vec<usize>, KbError> {
        names
            .iter()
            .map(|n| var_pos(n).ok_or_else(|| KbError::Invalid(format!("?{n} not in pattern"))))
            .collect()
    };
    match &q.projection {
        Projection::Count { var, .. } => {
            let col = project(std::slice::from_ref(var))?[0];
            let distinct: BTreeSet<NodeId> = solutions.iter().map(|s| s[col]).collect();
            Ok(AnswerSet::Count(distinct.len() as u64))
        }
        Projection::Vars(names) => {
            let cols = project(names)?;
            let to_row = |s: &Vec<NodeId>| -> Vec<Node> {
                cols.iter().map(|&c| store.node(s[c]).clone()).collect()
            };
            let mut rows: Vec<Vec<Node>> = match &q.order {
                None => solutions
                    .iter()
                    .map(to_row)
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect(),
                Some(order) => {
                    let key_col = project(std::slice::from_ref(&order.var))?[0];
                    let mut keyed: Vec<(Node, Vec<Node>)> = solutions
                        .iter()
                        .map(|s| (store.node(s[key_col]).clone(), to_row(s)))
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect();
                    keyed.sort_by(|(ka, ra), (kb, rb)| {
                        let primary = match order.direction {
                            Direction::Asc => order_key(ka, kb),
                            Direction::Desc => order_key(kb, ka),
                        };
                        primary.then_with(|| render(ra).cmp(&render(rb)))
                    });
                    let mut seen = BTreeSet::new();
                    keyed
                        .into_iter()
                        .filter_map(|(_, r)| seen.insert(r.clone()).then_some(r))
                        .collect()
                }
            };
            let offset = q.offset.unwrap_or(0) as usize;
            rows = rows.into_iter().skip(offset).collect();
            if let Some(limit) = q.limit {
                rows.truncate(limit as usize);
            }
            Ok(AnswerSet::Bindings {
                vars: names.clone(),
                rows,
            })
        }
    }
}

fn render(row: &[Node]) -> String {
    row.iter().map(Node::to_string).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparql::parse_query;

    fn mona_store() -> TripleStore {
        TripleStore::parse_ntriples(
            "<http://dbpedia.org/resource/Mona_Lisa> <http://dbpedia.org/ontology/author> <http://dbpedia.org/resource/Leonardo_da_Vinci> .\n",
        )
        .unwrap()
    }

    #[test]
    fn single_pattern_author_query() {
        let q = parse_query("select ?a where { dbr:Mona_Lisa dbo:author ?a }").unwrap();
        let ans = execute_query(&q, &mona_store()).unwrap();
        assert_eq!(
            ans,
            AnswerSet::Bindings {
                vars: vec!["a".into()],
                rows: vec![vec![Node::iri("http://dbpedia.org/resource/Leonardo_da_Vinci")]],
            }
        );
    }

    #[test]
    fn ask_over_empty_store() {
        let q = parse_query("ASK { ?s ?p ?o }").unwrap();
        assert_eq!(execute_query(&q, &TripleStore::new()).unwrap(), AnswerSet::Boolean(false));
        let q = parse_query("ASK { }").unwrap();
        assert_eq!(execute_query(&q, &TripleStore::new()).unwrap(), AnswerSet::Boolean(true));
    }

    #[test]
    fn placeholder_rejected() {
        let q = parse_query("select ?a where { ?w dbo:author ?a . ?w rdfs:label $1 }").unwrap();
        assert!(matches!(
            execute_query(&q, &mona_store()),
            Err(KbError::TemplateNotAssembled)
        ));
    }

    fn label_store() -> TripleStore {
        TripleStore::parse_ntriples(concat!(
            "<http://dbpedia.org/resource/Mona_Lisa> <http://dbpedia.org/ontology/author> <http://dbpedia.org/resource/Leonardo_da_Vinci> .\n",
            "<http://dbpedia.org/resource/Mona_Lisa> <http://www.w3.org/2000/01/rdf-schema#label> \"Mona Lisa\" .\n",
            "<http://dbpedia.org/resource/Italy> <http://www.w3.org/2000/01/rdf-schema#label> \"Italy\"@en .\n",
            "<http://dbpedia.org/resource/Italy> <http://dbpedia.org/ontology/motto> \"Italia\" .\n",
        ))
        .unwrap()
    }

    #[test]
    fn untagged_label_matches_tagged_query() {
        let s = label_store();
        let q = parse_query(r#"select ?a where { ?w dbo:author ?a . ?w rdfs:label "Mona Lisa"@en }"#).unwrap();
        assert_eq!(execute_query(&q, &s).unwrap().len(), 1);
        let q = parse_query(r#"ASK { ?w rdfs:label "Italy"@de }"#).unwrap();
        assert_eq!(execute_query(&q, &s).unwrap(), AnswerSet::Boolean(false));
        let q = parse_query(r#"ASK { ?w dbo:motto "Italia"@en }"#).unwrap();
        assert_eq!(execute_query(&q, &s).unwrap(), AnswerSet::Boolean(false));
    }

    fn chain_store() -> TripleStore {
        let mut t = String::new();
        for (s, o, v) in [("a", "x", "3"), ("b", "x", "10"), ("c", "y", "2"), ("d", "x", "10")] {
            t.push_str(&format!("<http://e/{s}> <http://e/in> <http://e/{o}> .\n"));
            t.push_str(&format!("<http://e/{s}> <http://e/size> \"{v}\" .\n"));
        }
        TripleStore::parse_ntriples(&t).unwrap()
    }

    #[test]
    fn count_is_distinct_cardinality() {
        let s = chain_store();
        let count = parse_query("SELECT (COUNT(?s) AS ?n) WHERE { ?s <http://e/in> ?g . ?t <http://e/in> ?g }").unwrap();
        let distinct = parse_query("SELECT DISTINCT ?s WHERE { ?s <http://e/in> ?g . ?t <http://e/in> ?g }").unwrap();
        let n = execute_query(&distinct, &s).unwrap().len() as u64;
        assert_eq!(execute_query(&count, &s).unwrap(), AnswerSet::Count(n));
        assert_eq!(n, 4);
    }

    #[test]
    fn order_limit_offset() {
        let s = chain_store();
        let q = parse_query("SELECT ?s WHERE { ?s <http://e/size> ?v } ORDER BY DESC(?v) LIMIT 2 OFFSET 1").unwrap();
        let AnswerSet::Bindings { rows, .. } = execute_query(&q, &s).unwrap() else { panic!() };
        // sizes 10,10,3,2 numerically; the tie is broken by rendering (b < d)
        assert_eq!(rows, vec![vec![Node::iri("http://e/d")], vec![Node::iri("http://e/a")]]);
        let q = parse_query("SELECT ?v WHERE { ?s <http://e/size> ?v } ORDER BY ?v").unwrap();
        let AnswerSet::Bindings { rows, .. } = execute_query(&q, &s).unwrap() else { panic!() };
        let vals: Vec<String> = rows.iter().map(|r| r[0].to_string()).collect();
        assert_eq!(vals, ["\"2\"", "\"3\"", "\"10\""]);
    }

    #[test]
    fn repeated_variable_in_pattern() {
        let s = TripleStore::parse_ntriples("<http://e/a> <http://e/p> <http://e/a> .\n<http://e/a> <http://e/p> <http://e/b> .\n").unwrap();
        let q = parse_query("SELECT ?x WHERE { ?x <http://e/p> ?x }").unwrap();
        assert_eq!(execute_query(&q, &s).unwrap().len(), 1);
    }

    #[test]
    fn unknown_constant_gives_empty() {
        let q = parse_query("SELECT ?a WHERE { dbr:Nowhere dbo:author ?a }").unwrap();
        assert!(execute_query(&q, &mona_store()).unwrap().is_empty());
    }

    #[test]
    fn monotone_under_insertion() {
        let mut s = chain_store();
        let q = parse_query("SELECT ?s ?g WHERE { ?s <http://e/in> ?g }").unwrap();
        let before = execute_query(&q, &s).unwrap().items();
        s.insert(Node::iri("http://e/z"), Node::iri("http://e/in"), Node::iri("http://e/x")).unwrap();
        let after = execute_query(&q, &s).unwrap().items();
        assert!(before.is_subset(&after));
        assert_eq!(after.len(), before.len() + 1);
    }
}
