//! `SELECT <vars> WHERE { <pattern> ( . <pattern> )* }` over the store.
//!
//! Only conjunctive triple patterns are supported; no FILTER, OPTIONAL or
//! property paths. Terms are `ds:` IRIs, double-quoted literals, `?vars`
//! and (in predicate position) names from the closed vocabulary.

use std::fmt;

use super::store::{unify, Bindings, KnowledgeGraph};
use super::term::{Iri, Predicate, Slot, Term, Triple, TriplePattern};
use super::KgError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectQuery {
    /// Projected variables; empty means `SELECT *`.
    pub variables: Vec<String>,
    pub patterns: Vec<TriplePattern>,
}

/// One row of a `SELECT` result: projected bindings plus the triples that
/// matched each pattern, in pattern order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Solution {
    pub bindings: Vec<(String, Term)>,
    pub triples: Vec<Triple>,
}

impl Solution {
    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.iter().find(|(k, _)| k == var).map(|(_, v)| v)
    }
}

impl SelectQuery {
    /// Variables in projection order (`SELECT *` yields first-appearance order).
    pub fn projection(&self) -> Vec<String> {
        if !self.variables.is_empty() {
            return self.variables.clone();
        }
        let mut vars: Vec<String> = Vec::new();
        for p in &self.patterns {
            for v in p.variables() {
                if !vars.iter().any(|x| x == v) {
                    vars.push(v.to_string());
                }
            }
        }
        vars
    }

    /// Evaluates the basic graph pattern by index-backed nested joins.
    /// Solutions are sorted, so identical stores give identical output.
    pub fn execute(&self, graph: &KnowledgeGraph) -> Vec<Solution> {
        let mut partial: Vec<(Bindings, Vec<Triple>)> = vec![(Bindings::new(), Vec::new())];
        for pattern in &self.patterns {
            let mut next = Vec::new();
            for (bindings, matched) in &partial {
                let bound = substitute(pattern, bindings);
                for triple in graph.candidates(&bound) {
                    if let Some(extended) = unify(&bound, triple, bindings) {
                        let mut triples = matched.clone();
                        triples.push(triple.clone());
                        next.push((extended, triples));
                    }
                }
            }
            partial = next;
            if partial.is_empty() {
                break;
            }
        }
        let projection = self.projection();
        let mut out: Vec<Solution> = partial
            .into_iter()
            .map(|(bindings, triples)| Solution {
                bindings: projection
                    .iter()
                    .filter_map(|v| bindings.get(v).map(|t| (v.clone(), t.clone())))
                    .collect(),
                triples,
            })
            .collect();
        out.sort();
        out
    }
}

/// Replaces variables already bound (to terms of the right class) by their values.
fn substitute(pattern: &TriplePattern, bindings: &Bindings) -> TriplePattern {
    let subject = match &pattern.subject {
        Slot::Var(v) => match bindings.get(v) {
            Some(Term::Iri(iri)) => Slot::Bound(iri.clone()),
            _ => pattern.subject.clone(),
        },
        s => s.clone(),
    };
    let predicate = match &pattern.predicate {
        Slot::Var(v) => match bindings.get(v).and_then(Term::as_literal).map(str::parse) {
            Some(Ok(p)) => Slot::Bound(p),
            _ => pattern.predicate.clone(),
        },
        p => p.clone(),
    };
    let object = match &pattern.object {
        Slot::Var(v) => match bindings.get(v) {
            Some(t) => Slot::Bound(t.clone()),
            None => pattern.object.clone(),
        },
        o => o.clone(),
    };
    TriplePattern::new(subject, predicate, object)
}

impl fmt::Display for SelectQuery {
    /// Canonical single-line form; `parse_select` of it yields `self`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        if self.variables.is_empty() {
            f.write_str("*")?;
        } else {
            let vars: Vec<String> = self.variables.iter().map(|v| format!("?{v}")).collect();
            f.write_str(&vars.join(" "))?;
        }
        f.write_str(" WHERE { ")?;
        for (i, p) in self.patterns.iter().enumerate() {
            if i > 0 {
                f.write_str(" . ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(" }")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Var(String),
    Literal(String),
    LBrace,
    RBrace,
    Dot,
    Star,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self { chars: src.chars().peekable(), line: 1, column: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn err(&self, line: usize, column: usize, message: impl Into<String>) -> KgError {
        KgError::Syntax { line, column, message: message.into() }
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, KgError> {
        let mut out = Vec::new();
        loop {
            while self.chars.peek().is_some_and(|c| c.is_whitespace()) {
                self.bump();
            }
            let (line, column) = (self.line, self.column);
            let Some(&c) = self.chars.peek() else {
                out.push(Spanned { tok: Tok::Eof, line, column });
                return Ok(out);
            };
            let tok = match c {
                '{' => {
                    self.bump();
                    Tok::LBrace
                }
                '}' => {
                    self.bump();
                    Tok::RBrace
                }
                '.' => {
                    self.bump();
                    Tok::Dot
                }
                '*' => {
                    self.bump();
                    Tok::Star
                }
                '"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            None => return Err(self.err(self.line, self.column, "unterminated literal")),
                            Some('"') => break,
                            Some('\\') => match self.bump() {
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                Some('n') => s.push('\n'),
                                Some('r') => s.push('\r'),
                                Some('t') => s.push('\t'),
                                Some(other) => {
                                    return Err(self.err(
                                        self.line,
                                        self.column - 1,
                                        format!("unknown escape `\\{other}`"),
                                    ))
                                }
                                None => return Err(self.err(self.line, self.column, "unterminated literal")),
                            },
                            Some(c) => s.push(c),
                        }
                    }
                    Tok::Literal(s)
                }
                '?' => {
                    self.bump();
                    let mut name = self.word();
                    let glued_dot = name.len() > 1 && name.ends_with('.');
                    if glued_dot {
                        name.pop();
                    }
                    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                        return Err(self.err(line, column, format!("invalid variable name `?{name}`")));
                    }
                    out.push(Spanned { tok: Tok::Var(name), line, column });
                    if glued_dot {
                        out.push(Spanned { tok: Tok::Dot, line: self.line, column: self.column - 1 });
                    }
                    continue;
                }
                _ => {
                    let mut w = self.word();
                    if w.is_empty() {
                        self.bump();
                        return Err(self.err(line, column, format!("unexpected character `{c}`")));
                    }
                    // A statement separator may be glued to the end of a term.
                    let glued_dot = w.len() > 1 && w.ends_with('.');
                    if glued_dot {
                        w.pop();
                    }
                    out.push(Spanned { tok: Tok::Word(w), line, column });
                    if glued_dot {
                        out.push(Spanned { tok: Tok::Dot, line: self.line, column: self.column - 1 });
                    }
                    continue;
                }
            };
            out.push(Spanned { tok, line, column });
        }
    }

    fn word(&mut self) -> String {
        let mut w = String::new();
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() || matches!(c, '{' | '}' | '"' | '?') {
                break;
            }
            w.push(c);
            self.bump();
        }
        w
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(at: &Spanned, message: impl Into<String>) -> KgError {
        let found = match &at.tok {
            Tok::Eof => "end of input".to_string(),
            other => format!("{other:?}"),
        };
        KgError::Syntax { line: at.line, column: at.column, message: format!("{}, found {found}", message.into()) }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), KgError> {
        let t = self.next();
        match &t.tok {
            Tok::Word(w) if w.eq_ignore_ascii_case(kw) => Ok(()),
            _ => Err(Self::err(&t, format!("expected `{kw}`"))),
        }
    }

    fn query(&mut self) -> Result<SelectQuery, KgError> {
        self.keyword("SELECT")?;
        let mut variables = Vec::new();
        if self.peek().tok == Tok::Star {
            self.next();
        } else {
            while let Tok::Var(v) = &self.peek().tok {
                variables.push(v.clone());
                self.next();
            }
            if variables.is_empty() {
                return Err(Self::err(self.peek(), "expected `*` or at least one variable"));
            }
        }
        self.keyword("WHERE")?;
        let t = self.next();
        if t.tok != Tok::LBrace {
            return Err(Self::err(&t, "expected `{`"));
        }
        let mut patterns = vec![self.pattern()?];
        loop {
            let t = self.next();
            match t.tok {
                Tok::RBrace => break,
                Tok::Dot => {
                    if self.peek().tok == Tok::RBrace {
                        self.next();
                        break;
                    }
                    patterns.push(self.pattern()?);
                }
                _ => return Err(Self::err(&t, "expected `.` or `}`")),
            }
        }
        let t = self.peek();
        if t.tok != Tok::Eof {
            return Err(Self::err(t, "trailing input after `}`"));
        }
        for v in &variables {
            if !patterns.iter().any(|p| p.variables().contains(&v.as_str())) {
                return Err(KgError::Syntax {
                    line: 1,
                    column: 1,
                    message: format!("projected variable `?{v}` does not occur in WHERE"),
                });
            }
        }
        Ok(SelectQuery { variables, patterns })
    }

    fn pattern(&mut self) -> Result<TriplePattern, KgError> {
        let s = self.next();
        let subject = match &s.tok {
            Tok::Var(v) => Slot::Var(v.clone()),
            Tok::Word(w) => Slot::Bound(self.iri(&s, w)?),
            _ => return Err(Self::err(&s, "expected subject IRI or variable")),
        };
        let p = self.next();
        let predicate = match &p.tok {
            Tok::Var(v) => Slot::Var(v.clone()),
            Tok::Word(w) => match w.parse::<Predicate>() {
                Ok(pred) => Slot::Bound(pred),
                Err(_) => {
                    return Err(KgError::QueryPredicate { name: w.clone(), line: p.line, column: p.column })
                }
            },
            _ => return Err(Self::err(&p, "expected predicate or variable")),
        };
        let o = self.next();
        let object = match &o.tok {
            Tok::Var(v) => Slot::Var(v.clone()),
            Tok::Word(w) => Slot::Bound(Term::Iri(self.iri(&o, w)?)),
            Tok::Literal(l) => Slot::Bound(Term::Literal(l.clone())),
            _ => return Err(Self::err(&o, "expected object IRI, literal or variable")),
        };
        Ok(TriplePattern::new(subject, predicate, object))
    }

    fn iri(&self, at: &Spanned, w: &str) -> Result<Iri, KgError> {
        Iri::new(w).map_err(|e| KgError::Syntax { line: at.line, column: at.column, message: e.to_string() })
    }
}

/// Parses a `SELECT` query into its patterns (in source order).
pub fn parse_select(query: &str) -> Result<SelectQuery, KgError> {
    let toks = Lexer::new(query).tokens()?;
    Parser { toks, pos: 0 }.query()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pattern() {
        let q = parse_select("SELECT ?o WHERE { ds:numpy.flipud has_expression ?o }").unwrap();
        assert_eq!(q.variables, vec!["o"]);
        assert_eq!(q.patterns.len(), 1);
        assert_eq!(q.patterns[0].predicate, Slot::Bound(Predicate::HasExpression));
    }

    #[test]
    fn missing_closing_brace() {
        let src = "SELECT ?o WHERE { ds:numpy.flipud has_expression ?o";
        match parse_select(src).unwrap_err() {
            KgError::Syntax { line, column, message } => {
                assert_eq!(line, 1);
                assert_eq!(column, src.len() + 1);
                assert!(message.contains("end of input"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_predicate_reports_position() {
        let err = parse_select("SELECT ?o\nWHERE { ds:a hasColour ?o }").unwrap_err();
        assert_eq!(err, KgError::QueryPredicate { name: "hasColour".into(), line: 2, column: 14 });
    }

    #[test]
    fn two_patterns_and_glued_dot() {
        let q = parse_select(
            "select ?p ?t where { ds:numpy.flipud hasParameter ?p. ?p hasType ?t . }",
        )
        .unwrap();
        assert_eq!(q.patterns.len(), 2);
        assert_eq!(q.patterns[0].object, Slot::var("p"));
    }

    #[test]
    fn literal_objects_and_escapes() {
        let q = parse_select(r#"SELECT * WHERE { ?s has_expression "f(\"x\")" }"#).unwrap();
        assert_eq!(q.patterns[0].object, Slot::Bound(Term::literal(r#"f("x")"#)));
        assert!(q.variables.is_empty());
        assert_eq!(q.projection(), vec!["s"]);
    }

    #[test]
    fn canonical_printer_round_trips() {
        for src in [
            "SELECT ?o WHERE { ds:numpy.flipud has_expression ?o }",
            "SELECT * WHERE {?s ?p ?o}",
            "SELECT ?a ?b WHERE { ?a hasParameter ?b . ?b hasType \"array_like\" . }",
            r#"SELECT ?s WHERE { ?s has_explanation "line\nbreak \\ \"q\"" }"#,
        ] {
            let q = parse_select(src).unwrap();
            let printed = q.to_string();
            assert_eq!(parse_select(&printed).unwrap(), q, "{printed}");
        }
    }

    #[test]
    fn projected_variable_must_occur() {
        assert!(parse_select("SELECT ?z WHERE { ?s ?p ?o }").is_err());
    }

    #[test]
    fn bad_iri_is_a_syntax_error() {
        assert!(matches!(
            parse_select("SELECT ?o WHERE { numpy.flipud has_expression ?o }"),
            Err(KgError::Syntax { column: 19, .. })
        ));
    }
}
