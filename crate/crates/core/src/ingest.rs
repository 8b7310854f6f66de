//! Documentation records to knowledge-graph triples.
//!
//! Input is line-delimited JSON, one [`ApiRecord`] per line. Each record
//! becomes an API entity with attribute triples, dependency links to its
//! library and module, and one entity per parameter and return value.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{Iri, KgError, KnowledgeGraph, Predicate, Triple};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub position: u32,
    pub dtype: String,
    #[serde(default)]
    pub explanation: String,
    #[serde(default)]
    pub optional: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnRecord {
    pub index: u32,
    pub dtype: String,
    #[serde(default)]
    pub explanation: String,
}

/// One documented, callable API.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiRecord {
    pub qualified_name: String,
    pub expression: String,
    #[serde(default)]
    pub explanation: String,
    pub library: String,
    pub module: String,
    #[serde(default)]
    pub url: String,
    #[serde(default)]
    pub parameters: Vec<ParamRecord>,
    #[serde(default)]
    pub returns: Vec<ReturnRecord>,
    /// Documented library version, kept as graph metadata.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("record `{record}`: field `{field}`: {message}")]
    Invalid { record: String, field: String, message: String },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("reading corpus: {0}")]
    Io(String),
}

impl IngestError {
    fn invalid(record: &str, field: impl Into<String>, message: impl Into<String>) -> Self {
        IngestError::Invalid { record: record.to_string(), field: field.into(), message: message.into() }
    }
}

impl ApiRecord {
    pub fn validate(&self) -> Result<(), IngestError> {
        let name = self.qualified_name.as_str();
        let label = if name.is_empty() { "<unnamed>" } else { name };
        if name.is_empty() {
            return Err(IngestError::invalid(label, "qualified_name", "must not be empty"));
        }
        if self.library.is_empty() {
            return Err(IngestError::invalid(label, "library", "must not be empty"));
        }
        if name != self.library && !name.starts_with(&format!("{}.", self.library)) {
            return Err(IngestError::invalid(
                label,
                "qualified_name",
                format!("not prefixed by library `{}`", self.library),
            ));
        }
        if self.module.is_empty() {
            return Err(IngestError::invalid(label, "module", "must not be empty"));
        }
        if self.expression.trim().is_empty() {
            return Err(IngestError::invalid(label, "expression", "must not be empty"));
        }
        for (i, p) in self.parameters.iter().enumerate() {
            if p.position as usize != i {
                return Err(IngestError::invalid(
                    label,
                    format!("parameters[{i}].position"),
                    format!("expected position {i}, found {}", p.position),
                ));
            }
            if p.name.is_empty() {
                return Err(IngestError::invalid(label, format!("parameters[{i}].name"), "must not be empty"));
            }
            if p.dtype.is_empty() {
                return Err(IngestError::invalid(label, format!("parameters[{i}].dtype"), "must not be empty"));
            }
        }
        let mut names = BTreeSet::new();
        for p in &self.parameters {
            if !names.insert(p.name.as_str()) {
                return Err(IngestError::invalid(label, "parameters", format!("duplicate parameter `{}`", p.name)));
            }
        }
        let mut indices = BTreeSet::new();
        for (i, r) in self.returns.iter().enumerate() {
            if !indices.insert(r.index) {
                return Err(IngestError::invalid(label, "returns", format!("duplicate return index {}", r.index)));
            }
            if r.dtype.is_empty() {
                return Err(IngestError::invalid(label, format!("returns[{i}].dtype"), "must not be empty"));
            }
        }
        Ok(())
    }
}

/// Emits the triples for one record, in a fixed order.
pub fn ingest_record(record: &ApiRecord) -> Result<Vec<Triple>, IngestError> {
    record.validate()?;
    let name = record.qualified_name.as_str();
    let kg = |field: &str| {
        let field = field.to_string();
        move |e: KgError| IngestError::invalid(name, field.clone(), e.to_string())
    };

    let api = Iri::entity(name).map_err(kg("qualified_name"))?;
    let mut out = vec![
        Triple::attribute(api.clone(), Predicate::HasName, name).map_err(kg("qualified_name"))?,
        Triple::attribute(api.clone(), Predicate::HasExpression, record.expression.as_str())
            .map_err(kg("expression"))?,
        Triple::attribute(api.clone(), Predicate::HasExplanation, record.explanation.as_str())
            .map_err(kg("explanation"))?,
        Triple::new(
            api.clone(),
            Predicate::BelongsToLibrary,
            Iri::entity(&record.library).map_err(kg("library"))?,
        )
        .map_err(kg("library"))?,
        Triple::new(
            api.clone(),
            Predicate::BelongsToModule,
            Iri::entity(&record.module).map_err(kg("module"))?,
        )
        .map_err(kg("module"))?,
    ];

    for (i, p) in record.parameters.iter().enumerate() {
        let field = format!("parameters[{i}]");
        let entity = Iri::parameter(name, &p.name).map_err(kg(&field))?;
        out.push(Triple::new(api.clone(), Predicate::HasParameter, entity.clone()).map_err(kg(&field))?);
        out.push(Triple::attribute(entity.clone(), Predicate::HasType, p.dtype.as_str()).map_err(kg(&field))?);
        out.push(Triple::attribute(entity.clone(), Predicate::HasPosition, p.position.to_string()).map_err(kg(&field))?);
        out.push(
            Triple::attribute(entity.clone(), Predicate::HasOptional, p.optional.to_string()).map_err(kg(&field))?,
        );
        out.push(Triple::attribute(entity, Predicate::HasExplanation, p.explanation.as_str()).map_err(kg(&field))?);
    }

    for (i, r) in record.returns.iter().enumerate() {
        let field = format!("returns[{i}]");
        let entity = Iri::return_value(name, r.index).map_err(kg(&field))?;
        out.push(Triple::new(api.clone(), Predicate::HasReturn, entity.clone()).map_err(kg(&field))?);
        out.push(Triple::attribute(entity.clone(), Predicate::HasType, r.dtype.as_str()).map_err(kg(&field))?);
        out.push(Triple::attribute(entity, Predicate::HasExplanation, r.explanation.as_str()).map_err(kg(&field))?);
    }
    Ok(out)
}

/// Per-line problems found while ingesting a corpus.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct IngestReport {
    pub records: usize,
    pub errors: Vec<IngestError>,
}

impl IngestReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} records ingested, {} errors", self.records, self.errors.len())?;
        for e in &self.errors {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

/// Ingests line-delimited records from text. Bad lines are reported and skipped.
pub fn ingest_str(text: &str) -> (KnowledgeGraph, IngestReport) {
    let mut graph = KnowledgeGraph::new();
    let mut report = IngestReport::default();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: ApiRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                report.errors.push(IngestError::Line { line: line_no, message: e.to_string() });
                continue;
            }
        };
        match ingest_record(&record) {
            Ok(triples) => {
                for t in triples {
                    // ingest_record only emits validated triples
                    graph.insert(t).expect("validated triple");
                }
                if let Some(v) = &record.version {
                    graph.set_library_version(record.library.clone(), v.clone());
                }
                report.records += 1;
            }
            Err(e) => report.errors.push(IngestError::Line { line: line_no, message: e.to_string() }),
        }
    }
    (graph, report)
}

pub fn ingest_corpus(path: impl AsRef<Path>) -> Result<(KnowledgeGraph, IngestReport), IngestError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| IngestError::Io(format!("{}: {e}", path.as_ref().display())))?;
    Ok(ingest_str(&text))
}
