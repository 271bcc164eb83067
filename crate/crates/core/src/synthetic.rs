//! A monument-style benchmark whose test split only mentions entities that
//! never occur in training.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sparql::{RDFS_LABEL, RDF_TYPE};

const RESOURCE: &str = "http://dbpedia.org/resource/";
const ONTOLOGY: &str = "http://dbpedia.org/ontology/";

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "st"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "l"];

/// Question text and gold query for each pattern; `{}` is the entity.
pub const PATTERNS: &[(&str, &str)] = &[
    ("Where is {} located?", "SELECT ?x WHERE { <E> dbo:location ?x }"),
    ("Who was the architect of {}?", "SELECT ?x WHERE { <E> dbo:architect ?x }"),
    ("When was {} built?", "SELECT ?y WHERE { <E> dbo:yearOfConstruction ?y }"),
    ("Is {} a monument?", "ASK WHERE { <E> a dbo:Monument }"),
    (
        "How many monuments share an architect with {}?",
        "SELECT ( COUNT ( DISTINCT ?m ) AS ?c ) WHERE { <E> dbo:architect ?a . ?m dbo:architect ?a . ?m a dbo:Monument }",
    ),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub train_entities: usize,
    pub test_entities: usize,
    pub architects: usize,
    pub places: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            train_entities: 100,
            test_entities: 20,
            architects: 12,
            places: 15,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub name: String,
    pub iri: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticBenchmark {
    pub train_pairs: Vec<(String, String)>,
    pub test_pairs: Vec<(String, String)>,
    pub train_entities: Vec<Entity>,
    pub test_entities: Vec<Entity>,
    /// N-Triples text of the knowledge base.
    pub kb: String,
}

fn word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).expect("nonempty"));
        w.push_str(VOWELS.choose(rng).expect("nonempty"));
    }
    w.push_str(CODAS.choose(rng).expect("nonempty"));
    let mut c = w.chars();
    let first = c.next().expect("nonempty").to_ascii_uppercase();
    std::iter::once(first).chain(c).collect()
}

/// Distinct pseudo-words, none of which is in `avoid`.
fn fresh_words(rng: &mut ChaCha8Rng, n: usize, avoid: &mut BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = word(rng);
        if avoid.insert(w.to_lowercase()) {
            out.push(w);
        }
    }
    out
}

/// Entity names of one to three words drawn from a private word pool.
fn names(rng: &mut ChaCha8Rng, n: usize, avoid: &mut BTreeSet<String>) -> Vec<String> {
    let lengths: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=3)).collect();
    let pool = fresh_words(rng, lengths.iter().sum(), avoid);
    let mut it = pool.into_iter();
    lengths
        .into_iter()
        .map(|len| it.by_ref().take(len).collect::<Vec<_>>().join(" "))
        .collect()
}

fn entity(name: String) -> Entity {
    let iri = format!("{RESOURCE}{}", name.replace(' ', "_"));
    Entity { name, iri }
}

fn pairs(entities: &[Entity]) -> Vec<(String, String)> {
    let mut out = Vec::with_capacity(entities.len() * PATTERNS.len());
    for e in entities {
        for (question, query) in PATTERNS {
            out.push((
                question.replace("{}", &e.name),
                query.replace("<E>", &format!("<{}>", e.iri)),
            ));
        }
    }
    out
}

fn triple(kb: &mut String, s: &str, p: &str, o: &str) {
    writeln!(kb, "<{s}> <{p}> {o} .").expect("write to string");
}

fn label(kb: &mut String, e: &Entity) {
    let escaped = e.name.replace('\\', "\\\\").replace('"', "\\\"");
    triple(kb, &e.iri, RDFS_LABEL, &format!("\"{escaped}\"@en"));
}

/// Deterministic for a given configuration.
pub fn generate(cfg: &SyntheticConfig) -> SyntheticBenchmark {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut used: BTreeSet<String> = PATTERNS
        .iter()
        .flat_map(|(q, _)| q.split(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    let train: Vec<Entity> = names(&mut rng, cfg.train_entities, &mut used)
        .into_iter()
        .map(entity)
        .collect();
    let test: Vec<Entity> = names(&mut rng, cfg.test_entities, &mut used)
        .into_iter()
        .map(entity)
        .collect();
    let architects: Vec<Entity> = names(&mut rng, cfg.architects, &mut used)
        .into_iter()
        .map(entity)
        .collect();
    let places: Vec<Entity> = names(&mut rng, cfg.places, &mut used)
        .into_iter()
        .map(entity)
        .collect();

    let mut kb = String::new();
    let location = format!("{ONTOLOGY}location");
    let architect = format!("{ONTOLOGY}architect");
    let year = format!("{ONTOLOGY}yearOfConstruction");
    let monument = format!("<{ONTOLOGY}Monument>");
    let building = format!("<{ONTOLOGY}Building>");
    for e in train.iter().chain(&test) {
        label(&mut kb, e);
        let place = places.choose(&mut rng).expect("places configured");
        triple(&mut kb, &e.iri, &location, &format!("<{}>", place.iri));
        if !architects.is_empty() {
            let a = architects.choose(&mut rng).expect("nonempty");
            triple(&mut kb, &e.iri, &architect, &format!("<{}>", a.iri));
        }
        triple(&mut kb, &e.iri, &year, &format!("\"{}\"", rng.gen_range(1100..2000)));
        let class = if rng.gen_bool(0.7) { &monument } else { &building };
        triple(&mut kb, &e.iri, RDF_TYPE, class);
    }
    for e in architects.iter().chain(&places) {
        label(&mut kb, e);
    }

    SyntheticBenchmark {
        train_pairs: pairs(&train),
        test_pairs: pairs(&test),
        train_entities: train,
        test_entities: test,
        kb,
    }
}

/// Pairs as `question<TAB>sparql` lines.
pub fn pairs_text(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(q, s)| format!("{q}\t{s}\n")).collect()
}
