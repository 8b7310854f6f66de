//! The API knowledge graph: validated triples, an indexed in-memory store,
//! a basic-graph-pattern `SELECT` engine and a canonical text dump.
//!
//! A graph is built by a single writer (see [`crate::ingest`]) and then
//! shared read-only; `&KnowledgeGraph` is `Sync`, so wrapping it in an
//! `Arc` is all that concurrent readers need.

mod dump;
mod sparql;
mod store;
mod term;

pub use dump::{load_dump, save_dump};
pub use sparql::{parse_select, SelectQuery, Solution};
pub use store::{Bindings, KnowledgeGraph, PatternMatch};
pub use term::{Iri, Predicate, Slot, Term, Triple, TriplePattern, IRI_PREFIX};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KgError {
    #[error("invalid IRI `{0}`: {1}")]
    InvalidIri(String, &'static str),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("invalid triple field `{field}`: {message}")]
    Validation { field: &'static str, message: String },
    #[error("dump line {line}: {message}")]
    Dump { line: usize, message: String },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown predicate `{name}` at line {line}, column {column}")]
    QueryPredicate { name: String, line: usize, column: usize },
}
