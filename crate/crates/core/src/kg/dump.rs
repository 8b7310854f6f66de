//! Line-oriented dump: `#` metadata headers, then one triple per line,
//! sorted bytewise.
//!
//! ```text
//! # library=numpy version=1.26.4
//! ds:numpy.flipud belongsToLibrary ds:numpy
//! ds:numpy.flipud has_expression "numpy.flipud(m)"
//! ```

use super::store::KnowledgeGraph;
use super::term::{Iri, Predicate, Term, Triple};
use super::KgError;

pub fn save_dump(graph: &KnowledgeGraph) -> String {
    let mut out = String::new();
    for (library, version) in graph.metadata() {
        out.push_str(&format!("# library={library} version={version}\n"));
    }
    let mut lines: Vec<String> = graph.triples().map(ToString::to_string).collect();
    lines.sort_unstable();
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn load_dump(text: &str) -> Result<KnowledgeGraph, KgError> {
    let mut graph = KnowledgeGraph::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| KgError::Dump { line: line_no, message };
        if let Some(header) = line.strip_prefix('#') {
            if let Some((library, version)) = parse_header(header.trim()) {
                graph.set_library_version(library, version);
            }
            continue;
        }
        let (subject, rest) = line
            .split_once(' ')
            .ok_or_else(|| err("expected `<subject> <predicate> <object>`".into()))?;
        let (predicate, object) = rest
            .split_once(' ')
            .ok_or_else(|| err("missing object".into()))?;
        let subject = Iri::new(subject).map_err(|e| err(e.to_string()))?;
        let predicate: Predicate = predicate.parse().map_err(|e: KgError| err(e.to_string()))?;
        let object = parse_object(object).map_err(err)?;
        let triple = Triple::new(subject, predicate, object).map_err(|e| err(e.to_string()))?;
        graph.insert(triple).map_err(|e| err(e.to_string()))?;
    }
    Ok(graph)
}

fn parse_header(header: &str) -> Option<(String, String)> {
    let rest = header.strip_prefix("library=")?;
    let (library, version) = rest.split_once(" version=")?;
    Some((library.to_string(), version.to_string()))
}

fn parse_object(s: &str) -> Result<Term, String> {
    let Some(body) = s.strip_prefix('"') else {
        return Iri::new(s).map(Term::Iri).map_err(|e| e.to_string());
    };
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' => {
                return if chars.as_str().is_empty() {
                    Ok(Term::Literal(out))
                } else {
                    Err("trailing characters after literal".into())
                };
            }
            '\\' => match chars.next() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                Some('t') => out.push('\t'),
                Some(other) => return Err(format!("unknown escape `\\{other}`")),
                None => return Err("dangling backslash".into()),
            },
            c => out.push(c),
        }
    }
    Err("unterminated literal".into())
}
