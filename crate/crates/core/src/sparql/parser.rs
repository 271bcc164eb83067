use super::ast::*;
use super::SparqlError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Var(String),
    Placeholder(u32),
    IriRef(String),
    PName(String, String),
    Str(String, Option<String>),
    Int(u64),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    at: usize,
}

const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "FILTER", "OPTIONAL", "UNION", "MINUS", "BIND", "VALUES", "SERVICE", "GRAPH", "HAVING",
    "EXISTS", "CONSTRUCT", "DESCRIBE", "BASE", "FROM", "NAMED",
];
const UNSUPPORTED_AGGREGATES: &[&str] = &["SUM", "AVG", "MIN", "MAX", "SAMPLE", "GROUP_CONCAT"];

fn is_pn_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

fn lex(src: &str) -> Result<Vec<Spanned>, SparqlError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |msg: &str, at: usize| SparqlError::Parse {
        message: msg.to_string(),
        offset: at,
    };
    while i < bytes.len() {
        let c = src[i..].chars().next().unwrap();
        let at = i;
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        match c {
            '?' | '$' => {
                let start = i + 1;
                let mut j = start;
                while let Some(ch) = src[j..].chars().next().filter(|ch| is_pn_char(*ch)) {
                    j += ch.len_utf8();
                }
                let name = &src[start..j];
                if name.is_empty() {
                    out.push(Spanned {
                        tok: Tok::Punct(c),
                        at,
                    });
                    i = start;
                    continue;
                }
                let tok = if c == '$' && name.bytes().all(|b| b.is_ascii_digit()) {
                    let k: u32 = name.parse().map_err(|_| err("placeholder index overflow", at))?;
                    if k == 0 {
                        return Err(err("placeholder index must be ≥ 1", at));
                    }
                    Tok::Placeholder(k)
                } else {
                    Tok::Var(name.to_string())
                };
                out.push(Spanned { tok, at });
                i = j;
            }
            '<' => {
                let rest = &src[i + 1..];
                let end = rest.find(|ch: char| ch == '>' || ch.is_whitespace() || ch == '<');
                match end {
                    Some(e) if rest[e..].starts_with('>') => {
                        out.push(Spanned {
                            tok: Tok::IriRef(rest[..e].to_string()),
                            at,
                        });
                        i += e + 2;
                    }
                    _ => {
                        out.push(Spanned {
                            tok: Tok::Punct('<'),
                            at,
                        });
                        i += 1;
                    }
                }
            }
            '"' | '\'' => {
                let quote = c;
                let mut j = i + 1;
                let mut lexical = String::new();
                loop {
                    let Some(ch) = src[j..].chars().next() else {
                        return Err(err("unterminated string", at));
                    };
                    j += ch.len_utf8();
                    if ch == quote {
                        break;
                    }
                    if ch == '\\' {
                        let Some(esc) = src[j..].chars().next() else {
                            return Err(err("unterminated string", at));
                        };
                        j += esc.len_utf8();
                        lexical.push(match esc {
                            'n' => '\n',
                            't' => '\t',
                            'r' => '\r',
                            '"' | '\'' | '\\' => esc,
                            _ => return Err(err("unknown string escape", j - 2)),
                        });
                    } else {
                        lexical.push(ch);
                    }
                }
                let mut lang = None;
                if src[j..].starts_with('@') {
                    let start = j + 1;
                    let mut k = start;
                    while k < bytes.len() && (bytes[k].is_ascii_alphanumeric() || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k == start {
                        return Err(err("empty language tag", j));
                    }
                    lang = Some(src[start..k].to_string());
                    j = k;
                } else if src[j..].starts_with("^^") {
                    return Err(SparqlError::Unsupported {
                        construct: "datatyped literal".into(),
                        offset: j,
                    });
                }
                out.push(Spanned {
                    tok: Tok::Str(lexical, lang),
                    at,
                });
                i = j;
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'.' && bytes.get(j + 1).is_some_and(u8::is_ascii_digit) || bytes[j] == b'e' || bytes[j] == b'E') {
                    return Err(SparqlError::Unsupported {
                        construct: "numeric literal".into(),
                        offset: at,
                    });
                }
                let v = src[i..j].parse().map_err(|_| err("integer overflow", at))?;
                out.push(Spanned { tok: Tok::Int(v), at });
                i = j;
            }
            c if is_pn_char(c) || c == ':' => {
                let mut j = i;
                while let Some(ch) = src[j..].chars().next().filter(|ch| is_pn_char(*ch) || *ch == '.') {
                    j += ch.len_utf8();
                }
                if src[j..].starts_with(':') {
                    let prefix = src[i..j].to_string();
                    j += 1;
                    let mut local = String::new();
                    while let Some(ch) = src[j..].chars().next() {
                        if ch == '\\' {
                            let Some(esc) = src[j + 1..].chars().next() else {
                                return Err(err("dangling escape in local name", j));
                            };
                            local.push(esc);
                            j += 1 + esc.len_utf8();
                        } else if is_pn_char(ch) || matches!(ch, '.' | '%' | ':') {
                            local.push(ch);
                            j += ch.len_utf8();
                        } else {
                            break;
                        }
                    }
                    // a local name cannot end with an unescaped '.'
                    while local.ends_with('.') && src[..j].ends_with('.') && !src[..j].ends_with("\\.") {
                        local.pop();
                        j -= 1;
                    }
                    out.push(Spanned {
                        tok: Tok::PName(prefix, local),
                        at,
                    });
                } else {
                    // words never carry dots
                    let mut k = i;
                    while let Some(ch) = src[k..].chars().next().filter(|ch| is_pn_char(*ch)) {
                        k += ch.len_utf8();
                    }
                    out.push(Spanned {
                        tok: Tok::Word(src[i..k].to_string()),
                        at,
                    });
                    j = k;
                }
                i = j;
            }
            _ => {
                out.push(Spanned {
                    tok: Tok::Punct(c),
                    at,
                });
                i += c.len_utf8();
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: usize,
    prefixes: Vec<(String, String)>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |s| s.at)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, SparqlError> {
        Err(SparqlError::Parse {
            message: message.into(),
            offset: self.offset(),
        })
    }

    fn unsupported<T>(&self, construct: impl Into<String>) -> Result<T, SparqlError> {
        Err(SparqlError::Unsupported {
            construct: construct.into(),
            offset: self.offset(),
        })
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SparqlError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.fail(format!("expected {kw}"))
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), SparqlError> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            self.fail(format!("expected `{c}`"))
        }
    }

    fn check_unsupported_word(&self) -> Result<(), SparqlError> {
        if let Some(Tok::Word(w)) = self.peek() {
            let up = w.to_ascii_uppercase();
            if UNSUPPORTED_KEYWORDS.contains(&up.as_str()) {
                return self.unsupported(up);
            }
            if up == "GROUP" {
                return self.unsupported("GROUP BY");
            }
            if UNSUPPORTED_AGGREGATES.contains(&up.as_str()) {
                return self.unsupported(up);
            }
        }
        Ok(())
    }

    fn expect_var(&mut self) -> Result<String, SparqlError> {
        match self.peek() {
            Some(Tok::Var(v)) => {
                let v = v.clone();
                self.pos += 1;
                Ok(v)
            }
            _ => self.fail("expected a variable"),
        }
    }

    fn expect_int(&mut self) -> Result<u64, SparqlError> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => self.fail("expected a non-negative integer"),
        }
    }

    fn prologue(&mut self) -> Result<(), SparqlError> {
        loop {
            self.check_unsupported_word()?;
            if !self.eat_keyword("PREFIX") {
                return Ok(());
            }
            let label = match self.next() {
                Some(Tok::PName(p, l)) if l.is_empty() => p,
                _ => {
                    self.pos -= 1;
                    return self.fail("expected a prefix label ending in `:`");
                }
            };
            let iri = match self.next() {
                Some(Tok::IriRef(iri)) => iri,
                _ => {
                    self.pos -= 1;
                    return self.fail("expected <iri> after prefix label");
                }
            };
            self.prefixes.push((label, iri));
        }
    }

    fn count(&mut self) -> Result<(String, bool), SparqlError> {
        self.expect_keyword("COUNT")?;
        self.expect_punct('(')?;
        let distinct = self.eat_keyword("DISTINCT");
        if self.peek() == Some(&Tok::Punct('*')) {
            return self.unsupported("COUNT(*)");
        }
        let var = self.expect_var()?;
        self.expect_punct(')')?;
        Ok((var, distinct))
    }

    fn projection(&mut self) -> Result<Projection, SparqlError> {
        self.check_unsupported_word()?;
        if self.peek() == Some(&Tok::Punct('*')) {
            return self.unsupported("SELECT *");
        }
        if self.is_keyword("COUNT") {
            let (var, distinct) = self.count()?;
            return Ok(Projection::Count {
                var,
                distinct,
                alias: None,
            });
        }
        if self.eat_punct('(') {
            self.check_unsupported_word()?;
            if !self.is_keyword("COUNT") {
                return self.unsupported("projection expression");
            }
            let (var, distinct) = self.count()?;
            self.expect_keyword("AS")?;
            let alias = self.expect_var()?;
            self.expect_punct(')')?;
            return Ok(Projection::Count {
                var,
                distinct,
                alias: Some(alias),
            });
        }
        let mut vars = Vec::new();
        while let Some(Tok::Var(v)) = self.peek() {
            vars.push(v.clone());
            self.pos += 1;
        }
        if vars.is_empty() {
            return self.fail("expected projection");
        }
        Ok(Projection::Vars(vars))
    }

    fn iri_of(&self, prefix: String, local: String) -> Result<Iri, SparqlError> {
        let iri = Iri::Prefixed { prefix, local };
        if iri.resolve(&self.prefixes).is_none() {
            let Iri::Prefixed { prefix, .. } = iri else { unreachable!() };
            return Err(SparqlError::UnknownPrefix {
                prefix,
                offset: self.offset(),
            });
        }
        Ok(iri)
    }

    fn term(&mut self, position: &str) -> Result<Term, SparqlError> {
        self.check_unsupported_word()?;
        let term = match self.peek().cloned() {
            Some(Tok::Var(v)) => Term::Var(v),
            Some(Tok::Placeholder(k)) => Term::Placeholder(k),
            Some(Tok::IriRef(s)) => Term::Iri(Iri::Full(s)),
            Some(Tok::PName(p, _)) if p == "_" => return self.unsupported("blank node"),
            Some(Tok::PName(p, l)) => Term::Iri(self.iri_of(p, l)?),
            Some(Tok::Str(lex, lang)) => Term::Literal(Literal { lexical: lex, lang }),
            Some(Tok::Word(w)) if w == "a" && position == "predicate" => Term::A,
            Some(Tok::Punct('[')) => return self.unsupported("blank node"),
            Some(Tok::Punct('(')) => return self.unsupported("collection"),
            Some(Tok::Punct('{')) => {
                if matches!(self.toks.get(self.pos + 1).map(|s| &s.tok), Some(Tok::Word(w)) if w.eq_ignore_ascii_case("SELECT")) {
                    return self.unsupported("subquery");
                }
                return self.unsupported("nested group");
            }
            Some(Tok::Punct('^')) if position == "predicate" => {
                return self.unsupported("property path")
            }
            Some(Tok::Int(_)) | Some(Tok::Word(_)) => {
                return self.unsupported(format!("{position} term"))
            }
            _ => return self.fail(format!("expected {position}")),
        };
        self.pos += 1;
        Ok(term)
    }

    fn reject_path_operator(&self) -> Result<(), SparqlError> {
        match self.peek() {
            Some(Tok::Punct('/' | '|' | '*' | '+' | '?' | '^' | '!')) => {
                self.unsupported("property path")
            }
            _ => Ok(()),
        }
    }

    fn group(&mut self) -> Result<Vec<TriplePattern>, SparqlError> {
        self.expect_punct('{')?;
        let mut patterns = Vec::new();
        loop {
            self.check_unsupported_word()?;
            if self.eat_punct('}') {
                return Ok(patterns);
            }
            if self.peek().is_none() {
                return self.fail("unterminated group, expected `}`");
            }
            let subject = self.term("subject")?;
            loop {
                let predicate = self.term("predicate")?;
                self.reject_path_operator()?;
                loop {
                    let object = self.term("object")?;
                    patterns.push(TriplePattern::new(subject.clone(), predicate.clone(), object));
                    if !self.eat_punct(',') {
                        break;
                    }
                }
                if !self.eat_punct(';') {
                    break;
                }
                while self.eat_punct(';') {}
                if matches!(self.peek(), Some(Tok::Punct('.')) | Some(Tok::Punct('}'))) {
                    break;
                }
            }
            self.check_unsupported_word()?;
            if self.eat_punct('.') {
                continue;
            }
            if self.peek() != Some(&Tok::Punct('}')) {
                return self.fail("expected `.` or `}` after triple");
            }
        }
    }

    fn modifiers(&mut self, q: &mut SparqlQuery) -> Result<(), SparqlError> {
        loop {
            self.check_unsupported_word()?;
            if self.eat_keyword("ORDER") {
                self.expect_keyword("BY")?;
                let direction = if self.eat_keyword("DESC") {
                    Some(Direction::Desc)
                } else if self.eat_keyword("ASC") {
                    Some(Direction::Asc)
                } else {
                    None
                };
                let var = if direction.is_some() {
                    self.expect_punct('(')?;
                    let v = self.expect_var()?;
                    self.expect_punct(')')?;
                    v
                } else {
                    self.expect_var()?
                };
                if matches!(self.peek(), Some(Tok::Var(_))) {
                    return self.unsupported("multiple ORDER BY keys");
                }
                q.order = Some(OrderBy {
                    var,
                    direction: direction.unwrap_or(Direction::Asc),
                });
            } else if self.eat_keyword("LIMIT") {
                q.limit = Some(self.expect_int()?);
            } else if self.eat_keyword("OFFSET") {
                q.offset = Some(self.expect_int()?);
            } else {
                return Ok(());
            }
        }
    }

    fn query(&mut self) -> Result<SparqlQuery, SparqlError> {
        self.prologue()?;
        let mut q = if self.eat_keyword("SELECT") {
            let distinct = self.eat_keyword("DISTINCT");
            if self.is_keyword("REDUCED") {
                return self.unsupported("REDUCED");
            }
            let projection = self.projection()?;
            self.check_unsupported_word()?;
            self.eat_keyword("WHERE");
            SparqlQuery {
                prefixes: Vec::new(),
                form: QueryForm::Select,
                distinct,
                projection,
                patterns: Vec::new(),
                order: None,
                limit: None,
                offset: None,
            }
        } else if self.eat_keyword("ASK") {
            self.check_unsupported_word()?;
            self.eat_keyword("WHERE");
            SparqlQuery::ask(Vec::new())
        } else {
            self.check_unsupported_word()?;
            return self.fail("expected SELECT or ASK");
        };
        q.patterns = self.group()?;
        self.modifiers(&mut q)?;
        if self.peek().is_some() {
            return self.fail("unexpected trailing input");
        }
        q.prefixes = std::mem::take(&mut self.prefixes);
        q.validate()?;
        Ok(q)
    }
}

/// Parses the supported SELECT/ASK/COUNT basic-graph-pattern subset.
pub fn parse_query(text: &str) -> Result<SparqlQuery, SparqlError> {
    let toks = lex(text)?;
    Parser {
        toks,
        pos: 0,
        end: text.len(),
        prefixes: Vec::new(),
    }
    .query()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mona_lisa() {
        let q = parse_query("select ?a where { dbr:Mona_Lisa dbo:author ?a }").unwrap();
        assert_eq!(q.form, QueryForm::Select);
        assert_eq!(q.projection, Projection::Vars(vec!["a".into()]));
        assert_eq!(q.patterns.len(), 1);
        assert_eq!(
            q.patterns[0].subject,
            Term::Iri(Iri::prefixed("dbr", "Mona_Lisa"))
        );
    }

    #[test]
    fn template_with_placeholder() {
        let q = parse_query("select ?a where { ?w dbo:author ?a . ?w rdfs:label $1 }").unwrap();
        assert_eq!(q.patterns.len(), 2);
        assert_eq!(q.patterns[1].object, Term::Placeholder(1));
        assert_eq!(q.placeholders().into_iter().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn filter_is_unsupported() {
        let text = "SELECT ?x WHERE { ?x FILTER(...) }";
        match parse_query(text) {
            Err(SparqlError::Unsupported { construct, offset }) => {
                assert_eq!(construct, "FILTER");
                assert_eq!(offset, text.find("FILTER").unwrap());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn other_unsupported_constructs() {
        let cases = [
            ("SELECT ?x WHERE { OPTIONAL { ?x ?p ?o } }", "OPTIONAL"),
            ("SELECT ?x WHERE { { ?x ?p ?o } UNION { ?x ?p ?o } }", "nested group"),
            ("SELECT ?x WHERE { ?x ?p ?o } GROUP BY ?x", "GROUP BY"),
            ("SELECT ?x WHERE { { SELECT ?x WHERE { ?x ?p ?o } } }", "subquery"),
            ("SELECT ?x WHERE { ?x dbo:a/dbo:b ?o }", "property path"),
            ("SELECT ?x WHERE { ?x ^dbo:a ?o }", "property path"),
            ("SELECT (SUM(?x) AS ?s) WHERE { ?x ?p ?o }", "SUM"),
            ("SELECT (STR(?x) AS ?s) WHERE { ?x ?p ?o }", "projection expression"),
            ("SELECT ?x WHERE { ?x dbo:h \"3\"^^xsd:int }", "datatyped literal"),
            ("SELECT * WHERE { ?x ?p ?o }", "SELECT *"),
        ];
        for (text, construct) in cases {
            match parse_query(text) {
                Err(SparqlError::Unsupported { construct: c, .. }) => assert_eq!(c, construct, "{text}"),
                other => panic!("{text}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn malformed_input() {
        for text in [
            "",
            "SELECT ?x WHERE { ?x ?p }",
            "SELECT ?x WHERE { ?x ?p ?o",
            "SELECT ?x WHERE { ?x ?p ?o } LIMIT",
            "SELECT WHERE { ?x ?p ?o }",
            "SELECT ?x WHERE { ?x ?p ?o } garbage",
            "SELECT ?x WHERE { ?x ?p \"open }",
        ] {
            assert!(
                matches!(parse_query(text), Err(SparqlError::Parse { .. })),
                "{text}: {:?}",
                parse_query(text)
            );
        }
        assert!(matches!(
            parse_query("SELECT ?y WHERE { ?x ?p ?o }"),
            Err(SparqlError::Invalid(_))
        ));
        assert!(matches!(
            parse_query("SELECT ?x WHERE { ?x foo:bar ?o }"),
            Err(SparqlError::UnknownPrefix { .. })
        ));
        assert!(parse_query("SELECT ?x WHERE { ?x $1 ?o }").is_err());
    }

    #[test]
    fn predicate_object_lists_and_modifiers() {
        let q = parse_query(
            "PREFIX ex: <http://example.org/> SELECT DISTINCT ?uri WHERE { ?uri a dbo:Film ; dbo:country dbr:Italy , ex:Rome . } ORDER BY DESC(?uri) LIMIT 5 OFFSET 2",
        )
        .unwrap();
        assert!(q.distinct);
        assert_eq!(q.patterns.len(), 3);
        assert_eq!(q.patterns[0].predicate, Term::A);
        assert_eq!(q.patterns[2].object, Term::Iri(Iri::prefixed("ex", "Rome")));
        assert_eq!(q.limit, Some(5));
        assert_eq!(q.offset, Some(2));
        assert_eq!(q.order.as_ref().unwrap().direction, Direction::Desc);
        assert_eq!(q.prefixes, vec![("ex".to_string(), "http://example.org/".to_string())]);
    }

    #[test]
    fn count_forms() {
        let q = parse_query("SELECT (COUNT(DISTINCT ?m) AS ?c) WHERE { ?m dbo:architect ?a }").unwrap();
        assert_eq!(
            q.projection,
            Projection::Count {
                var: "m".into(),
                distinct: true,
                alias: Some("c".into())
            }
        );
        let q = parse_query("select count(?m) { ?m ?p ?o }").unwrap();
        assert!(matches!(q.projection, Projection::Count { alias: None, distinct: false, .. }));
    }

    #[test]
    fn literals_and_escaped_locals() {
        let q = parse_query(
            r#"SELECT ?v WHERE { ?v rdfs:label "Italy"@en . ?v dbo:x 'it''s' . ?v dbo:y dbr:Washington_Monument_\(Baltimore\) . ?v dbo:z dbr:St._Louis }"#,
        );
        // 'it' followed by 's' is malformed
        assert!(q.is_err());
        let q = parse_query(
            r#"SELECT ?v WHERE { ?v rdfs:label "Italy"@en . ?v dbo:y dbr:Washington_Monument_\(Baltimore\) . ?v dbo:z dbr:St._Louis . ?v dbo:q "say \"hi\"" }"#,
        )
        .unwrap();
        assert_eq!(q.patterns[0].object, Term::Literal(Literal::lang("Italy", "en")));
        assert_eq!(
            q.patterns[1].object,
            Term::Iri(Iri::prefixed("dbr", "Washington_Monument_(Baltimore)"))
        );
        assert_eq!(q.patterns[2].object, Term::Iri(Iri::prefixed("dbr", "St._Louis")));
        assert_eq!(q.patterns[3].object, Term::Literal(Literal::plain("say \"hi\"")));
    }

    #[test]
    fn keywords_are_case_insensitive() {
        let a = parse_query("SeLeCt ?X wHeRe { ?X dbo:p ?y } limit 3").unwrap();
        assert_eq!(a.projection, Projection::Vars(vec!["X".into()]));
        assert_eq!(a.limit, Some(3));
    }

    #[test]
    fn trailing_dot_on_prefixed_name() {
        let q = parse_query("ASK { dbr:Paris dbo:country dbr:France. }").unwrap();
        assert_eq!(q.patterns[0].object, Term::Iri(Iri::prefixed("dbr", "France")));
    }
}
