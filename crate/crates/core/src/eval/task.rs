use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bug::{extract_tests, TestSpec};

/// One repair target: a failing program and the task it was written for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub library: String,
    pub description: String,
    pub buggy_code: String,
    #[serde(default)]
    pub imports: String,
    #[serde(default)]
    pub test_code: String,
}

impl TaskRecord {
    /// Tests from `test_code` when present, else the example tests in the
    /// description. `test_code` without any `assert` is adopted as a whole.
    pub fn tests(&self) -> TestSpec {
        if self.test_code.trim().is_empty() {
            return extract_tests(&self.description);
        }
        let spec = extract_tests(&format!("```\n{}\n```", self.test_code));
        if spec.is_empty() {
            TestSpec::from_harness(&self.test_code)
        } else {
            spec
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for CorpusError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Parses a line-delimited JSON corpus. Bad records are reported and
/// skipped; the rest still load.
pub fn parse_corpus(text: &str) -> (Vec<TaskRecord>, Vec<CorpusError>) {
    let mut tasks = Vec::new();
    let mut errors = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| CorpusError { line: i + 1, message };
        match serde_json::from_str::<TaskRecord>(line) {
            Ok(t) if t.id.trim().is_empty() => errors.push(err("empty id".into())),
            Ok(t) if t.buggy_code.trim().is_empty() => errors.push(err(format!("task {}: empty buggy_code", t.id))),
            Ok(t) if !ids.insert(t.id.clone()) => errors.push(err(format!("duplicate task id {}", t.id))),
            Ok(t) => tasks.push(t),
            Err(e) => errors.push(err(e.to_string())),
        }
    }
    (tasks, errors)
}

pub fn load_corpus(path: impl AsRef<Path>) -> std::io::Result<(Vec<TaskRecord>, Vec<CorpusError>)> {
    Ok(parse_corpus(&std::fs::read_to_string(path)?))
}
