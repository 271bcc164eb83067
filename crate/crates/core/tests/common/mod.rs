#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sparqa::kb::{AnswerSet, Node, TripleStore};
use sparqa::linalg::Mat;
use sparqa::sparql::{
    Direction, Iri, Literal, OrderBy, Projection, QueryForm, SparqlQuery, Term, TriplePattern,
    RDFS_LABEL, RDF_TYPE,
};

// ---------- CRF ----------

pub fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat<f64> {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect())
}

/// Random transitions with the structural entries set to `-inf`.
pub fn random_transitions(rng: &mut ChaCha8Rng, k: usize, scale: f64) -> Mat<f64> {
    let mut m = random_mat(rng, k + 2, k + 2, scale);
    for r in 0..k + 2 {
        for c in 0..k + 2 {
            if c == k || r == k + 1 {
                m.set(r, c, f64::NEG_INFINITY);
            }
        }
    }
    m
}

pub fn all_paths(len: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    out
}

/// Path score summed directly from its definition.
pub fn oracle_path_score(e: &Mat<f64>, tr: &Mat<f64>, path: &[usize]) -> f64 {
    let k = e.cols();
    let mut s = tr.get(k, path[0]);
    for t in 0..path.len() {
        s += e.get(t, path[t]);
        if t > 0 {
            s += tr.get(path[t - 1], path[t]);
        }
    }
    s + tr.get(path[path.len() - 1], k + 1)
}

pub fn oracle_log_partition(e: &Mat<f64>, tr: &Mat<f64>) -> f64 {
    let scores: Vec<f64> = all_paths(e.rows(), e.cols())
        .iter()
        .map(|p| oracle_path_score(e, tr, p))
        .collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

pub fn oracle_best_score(e: &Mat<f64>, tr: &Mat<f64>) -> f64 {
    all_paths(e.rows(), e.cols())
        .iter()
        .map(|p| oracle_path_score(e, tr, p))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

// ---------- finite differences ----------

/// Central difference of `f` at `x[i]`.
pub fn central_diff(x: &mut [f64], i: usize, eps: f64, f: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + eps;
    let plus = f(x);
    x[i] = orig - eps;
    let minus = f(x);
    x[i] = orig;
    (plus - minus) / (2.0 * eps)
}

/// Relative gradient error with an absolute floor for near-zero entries.
pub fn grad_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

// ---------- basic graph patterns ----------

pub const EX: &str = "http://example.org/";

pub fn ex(i: usize) -> Node {
    Node::iri(format!("{EX}e{i}"))
}

pub fn pred(i: usize) -> String {
    match i {
        0 => RDF_TYPE.to_string(),
        1 => RDFS_LABEL.to_string(),
        i => format!("{EX}p{i}"),
    }
}

pub const PREDICATES: usize = 5;
pub const ENTITIES: usize = 20;

pub fn literal_pool() -> Vec<Literal> {
    vec![
        Literal::plain("alpha"),
        Literal::lang("alpha", "en"),
        Literal::lang("beta", "en"),
        Literal::plain("gamma"),
        Literal::plain("3"),
        Literal::plain("12"),
        Literal::plain("7.5"),
    ]
}

/// A random store over a small node universe.
pub fn random_store(rng: &mut ChaCha8Rng, max_triples: usize) -> TripleStore {
    let n = rng.gen_range(0..=max_triples);
    let lits = literal_pool();
    let mut store = TripleStore::new();
    for _ in 0..n {
        let s = ex(rng.gen_range(0..ENTITIES));
        let p = rng.gen_range(0..PREDICATES);
        let o = if p == 1 || rng.gen_bool(0.25) {
            Node::Literal(lits.choose(rng).unwrap().clone())
        } else {
            ex(rng.gen_range(0..ENTITIES))
        };
        store.insert(s, Node::iri(pred(p)), o).unwrap();
    }
    store
}

const VARS: [&str; 4] = ["a", "b", "c", "d"];

fn var_term(rng: &mut ChaCha8Rng, pool: usize) -> Term {
    Term::var(VARS[rng.gen_range(0..pool)])
}

fn entity_term(rng: &mut ChaCha8Rng) -> Term {
    // occasionally an IRI the store has never seen
    Term::Iri(Iri::full(format!("{EX}e{}", rng.gen_range(0..ENTITIES + 2))))
}

/// A random query with at most four patterns and four variables.
pub fn random_query(rng: &mut ChaCha8Rng) -> SparqlQuery {
    let pool = rng.gen_range(1..=4);
    let n = rng.gen_range(1..=4);
    let lits = literal_pool();
    let mut patterns = Vec::with_capacity(n);
    for _ in 0..n {
        let s = if rng.gen_bool(0.75) { var_term(rng, pool) } else { entity_term(rng) };
        let pi = rng.gen_range(0..PREDICATES + 1);
        let p = match pi {
            _ if rng.gen_bool(0.2) => var_term(rng, pool),
            0 => Term::A,
            1 => Term::Iri(Iri::prefixed("rdfs", "label")),
            i => Term::Iri(Iri::full(pred(i.min(PREDICATES - 1)))),
        };
        let o = match rng.gen_range(0..10) {
            0..=5 => var_term(rng, pool),
            6 | 7 => entity_term(rng),
            _ => Term::Literal(lits.choose(rng).unwrap().clone()),
        };
        patterns.push(TriplePattern::new(s, p, o));
    }
    let mut q = SparqlQuery::ask(patterns);
    let vars: Vec<String> = q.pattern_vars().into_iter().map(String::from).collect();
    if vars.is_empty() || rng.gen_bool(0.2) {
        return q;
    }
    q.form = QueryForm::Select;
    if rng.gen_bool(0.2) {
        q.projection = Projection::Count {
            var: vars.choose(rng).unwrap().clone(),
            distinct: rng.gen_bool(0.5),
            alias: Some("n".into()),
        };
        return q;
    }
    let mut proj: Vec<String> = vars.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
    if proj.is_empty() {
        proj.push(vars[0].clone());
    }
    q.projection = Projection::Vars(proj);
    q.distinct = rng.gen_bool(0.5);
    if rng.gen_bool(0.3) {
        q.order = Some(OrderBy {
            var: vars.choose(rng).unwrap().clone(),
            direction: if rng.gen_bool(0.5) { Direction::Asc } else { Direction::Desc },
        });
        if rng.gen_bool(0.5) {
            q.limit = Some(rng.gen_range(0..5));
        }
        if rng.gen_bool(0.5) {
            q.offset = Some(rng.gen_range(0..3));
        }
    }
    q
}

fn term_nodes(t: &Term, q: &SparqlQuery, label_object: bool) -> Option<Vec<Node>> {
    Some(match t {
        Term::A => vec![Node::iri(RDF_TYPE)],
        Term::Iri(i) => vec![Node::Iri(i.resolve(&q.prefixes)?)],
        Term::Literal(l) => {
            let mut v = vec![Node::Literal(l.clone())];
            if label_object && l.lang.is_some() {
                v.push(Node::Literal(Literal::plain(l.lexical.clone())));
            }
            v
        }
        Term::Var(_) | Term::Placeholder(_) => return None,
    })
}

/// Enumerates every assignment of the query variables over every node of
/// the store and keeps those under which all patterns are stored triples.
pub fn brute_force(q: &SparqlQuery, store: &TripleStore) -> AnswerSet {
    let triples: HashSet<(Node, Node, Node)> = store
        .triples()
        .map(|(s, p, o)| (s.clone(), p.clone(), o.clone()))
        .collect();
    let universe: Vec<Node> = store
        .triples()
        .flat_map(|(s, p, o)| [s.clone(), p.clone(), o.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut vars: Vec<String> = Vec::new();
    for p in &q.patterns {
        for t in p.terms() {
            if let Term::Var(v) = t {
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
        }
    }
    let holds = |p: &TriplePattern, assign: &[Option<Node>]| -> Option<bool> {
        let label = matches!(&p.predicate, Term::Iri(i) if i.resolve(&q.prefixes).as_deref() == Some(RDFS_LABEL));
        let mut slots: Vec<Vec<Node>> = Vec::with_capacity(3);
        for (pos, t) in p.terms().into_iter().enumerate() {
            match t {
                Term::Var(v) => {
                    let i = vars.iter().position(|x| x == v).unwrap();
                    slots.push(vec![assign[i].clone()?]);
                }
                other => slots.push(term_nodes(other, q, pos == 2 && label).unwrap()),
            }
        }
        Some(slots[0].iter().any(|s| {
            slots[1].iter().any(|p| {
                slots[2]
                    .iter()
                    .any(|o| triples.contains(&(s.clone(), p.clone(), o.clone())))
            })
        }))
    };
    let mut solutions: Vec<Vec<Node>> = Vec::new();
    let mut assign: Vec<Option<Node>> = vec![None; vars.len()];
    type Holds<'a> = dyn Fn(&TriplePattern, &[Option<Node>]) -> Option<bool> + 'a;
    fn rec(
        depth: usize,
        assign: &mut Vec<Option<Node>>,
        universe: &[Node],
        q: &SparqlQuery,
        holds: &Holds,
        out: &mut Vec<Vec<Node>>,
    ) {
        for p in &q.patterns {
            if holds(p, assign) == Some(false) {
                return;
            }
        }
        if depth == assign.len() {
            out.push(assign.iter().map(|a| a.clone().unwrap()).collect());
            return;
        }
        for n in universe {
            assign[depth] = Some(n.clone());
            rec(depth + 1, assign, universe, q, holds, out);
        }
        assign[depth] = None;
    }
    rec(0, &mut assign, &universe, q, &holds, &mut solutions);

    if q.form == QueryForm::Ask {
        return AnswerSet::Boolean(!solutions.is_empty());
    }
    let col = |v: &str| vars.iter().position(|x| x == v).unwrap();
    match &q.projection {
        Projection::Count { var, .. } => {
            let c = col(var);
            let distinct: BTreeSet<&Node> = solutions.iter().map(|s| &s[c]).collect();
            AnswerSet::Count(distinct.len() as u64)
        }
        Projection::Vars(names) => {
            let cols: Vec<usize> = names.iter().map(|n| col(n)).collect();
            let row = |s: &Vec<Node>| -> Vec<Node> { cols.iter().map(|&c| s[c].clone()).collect() };
            let mut rows: Vec<Vec<Node>> = match &q.order {
                None => solutions.iter().map(row).collect::<BTreeSet<_>>().into_iter().collect(),
                Some(o) => {
                    let k = col(&o.var);
                    let mut keyed: Vec<(Node, Vec<Node>)> = solutions
                        .iter()
                        .map(|s| (s[k].clone(), row(s)))
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect();
                    let num = |n: &Node| match n {
                        Node::Literal(l) => l.lexical.trim().parse::<f64>().ok(),
                        _ => None,
                    };
                    let text = |r: &Vec<Node>| r.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ");
                    keyed.sort_by(|(ka, ra), (kb, rb)| {
                        let (a, b) = match o.direction {
                            Direction::Asc => (ka, kb),
                            Direction::Desc => (kb, ka),
                        };
                        let primary = match (num(a), num(b)) {
                            (Some(x), Some(y)) => x.partial_cmp(&y).unwrap(),
                            _ => a.to_string().cmp(&b.to_string()),
                        };
                        primary.then_with(|| text(ra).cmp(&text(rb)))
                    });
                    let mut seen = BTreeSet::new();
                    keyed
                        .into_iter()
                        .filter_map(|(_, r)| seen.insert(r.clone()).then_some(r))
                        .collect()
                }
            };
            rows = rows.into_iter().skip(q.offset.unwrap_or(0) as usize).collect();
            if let Some(l) = q.limit {
                rows.truncate(l as usize);
            }
            AnswerSet::Bindings {
                vars: names.clone(),
                rows,
            }
        }
    }
}

// ---------- surface queries for the parser ----------

fn surface_iri(rng: &mut ChaCha8Rng) -> Iri {
    const LOCALS: [&str; 6] = ["Mona_Lisa", "author", "Film", "Rome_(city)", "St._Peter", "x-1"];
    match rng.gen_range(0..3) {
        0 => Iri::prefixed(["dbr", "dbo", "rdfs"][rng.gen_range(0..3)], LOCALS[rng.gen_range(0..LOCALS.len())]),
        1 => Iri::prefixed("ex", format!("n{}", rng.gen_range(0..9))),
        _ => Iri::full(format!("{EX}r{}", rng.gen_range(0..9))),
    }
}

fn surface_literal(rng: &mut ChaCha8Rng) -> Literal {
    const TEXT: [&str; 6] = ["Italy", "", "say \"hi\"", "back\\slash", "two words", "1889"];
    let lexical = TEXT[rng.gen_range(0..TEXT.len())];
    match rng.gen_range(0..3) {
        0 => Literal::plain(lexical),
        1 => Literal::lang(lexical, "en"),
        _ => Literal::lang(lexical, "pt-BR"),
    }
}

fn surface_term(rng: &mut ChaCha8Rng, pos: usize) -> Term {
    const NAMES: [&str; 5] = ["a", "uri", "x1", "W", "w2"];
    let var = Term::var(NAMES[rng.gen_range(0..NAMES.len())]);
    match (pos, rng.gen_range(0..4)) {
        (_, 0) => var,
        (1, 1) => Term::A,
        (1, _) => Term::Iri(surface_iri(rng)),
        (2, 1) => Term::Literal(surface_literal(rng)),
        (_, 2) => Term::Placeholder(rng.gen_range(1..4)),
        _ => Term::Iri(surface_iri(rng)),
    }
}

/// A random query in the supported subset, built directly as an AST.
pub fn random_surface_query(rng: &mut ChaCha8Rng) -> SparqlQuery {
    loop {
        let n = rng.gen_range(1..=4);
        let patterns = (0..n)
            .map(|_| TriplePattern::new(surface_term(rng, 0), surface_term(rng, 1), surface_term(rng, 2)))
            .collect();
        let mut q = SparqlQuery::ask(patterns);
        if q.to_string().contains("ex:") || rng.gen_bool(0.2) {
            q.prefixes.push(("ex".into(), "http://example.org/ns#".into()));
        }
        let vars: Vec<String> = q.pattern_vars().into_iter().map(String::from).collect();
        if rng.gen_bool(0.25) {
            return q;
        }
        if vars.is_empty() {
            continue;
        }
        q.form = QueryForm::Select;
        q.distinct = rng.gen_bool(0.5);
        q.projection = if rng.gen_bool(0.3) {
            Projection::Count {
                var: vars.choose(rng).unwrap().clone(),
                distinct: rng.gen_bool(0.5),
                alias: rng.gen_bool(0.5).then(|| "c".to_string()),
            }
        } else {
            Projection::Vars(vars.iter().filter(|_| rng.gen_bool(0.7)).cloned().collect::<Vec<_>>())
        };
        if matches!(&q.projection, Projection::Vars(v) if v.is_empty()) {
            q.projection = Projection::Vars(vec![vars[0].clone()]);
        }
        if rng.gen_bool(0.4) {
            q.order = Some(OrderBy {
                var: vars.choose(rng).unwrap().clone(),
                direction: if rng.gen_bool(0.5) { Direction::Asc } else { Direction::Desc },
            });
        }
        q.limit = rng.gen_bool(0.3).then(|| rng.gen_range(0..100));
        q.offset = rng.gen_bool(0.3).then(|| rng.gen_range(0..100));
        return q;
    }
}
