use serde::{Deserialize, Serialize};

use super::protocol::{FailureKind, RunMode, RunRequest, RunResponse, RunStatus};
use super::runner::{Runner, RunnerError};
use super::tests_extract::{expected_from_assertion, TestSpec};
use crate::pysrc::top_level_statements;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugKind {
    Runtime,
    Assertion,
    Unknown,
}

/// Stand-in source text when a runtime failure hits the very first statement.
pub const NOTHING_EXECUTED: &str = "(no statement executed)";

/// Stand-in source text when the runner could not say which statement hung.
pub const STATEMENT_UNKNOWN: &str = "(statement unknown)";

/// Node-level failure evidence handed to prompt construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugReport {
    pub kind: BugKind,
    /// The example tests the code was run against (may be empty).
    pub test_text: String,
    pub last_executed_source: String,
    pub first_failed_source: String,
    /// Innermost failing call inside the first failed statement, when the
    /// runner could narrow it down.
    #[serde(default)]
    pub failed_node: String,
    pub captured_value_repr: String,
    #[serde(default)]
    pub expected_repr: Option<String>,
    pub stderr_raw: String,
    #[serde(default)]
    pub note: Option<String>,
}

impl BugReport {
    fn new(kind: BugKind, tests: &TestSpec) -> Self {
        Self {
            kind,
            test_text: tests.assertion_text(),
            last_executed_source: String::new(),
            first_failed_source: String::new(),
            failed_node: String::new(),
            captured_value_repr: String::new(),
            expected_repr: None,
            stderr_raw: String::new(),
            note: None,
        }
    }

    /// A report with no localized failure, carrying only a note.
    pub fn unknown(tests: &TestSpec, note: impl Into<String>) -> Self {
        let mut r = Self::new(BugKind::Unknown, tests);
        r.note = Some(note.into());
        r
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        match self.kind {
            BugKind::Runtime if self.last_executed_source.is_empty() || self.first_failed_source.is_empty() => {
                Err("runtime report without both source fields".into())
            }
            BugKind::Assertion if self.captured_value_repr.is_empty() => {
                Err("assertion report without a captured value".into())
            }
            _ => Ok(()),
        }
    }
}

/// Setup preamble sent to the runner: the task imports, then test fixtures.
fn preamble(imports: &str, tests: &TestSpec) -> String {
    match (imports.trim().is_empty(), tests.fixtures.trim().is_empty()) {
        (_, true) => imports.to_string(),
        (true, false) => tests.fixtures.clone(),
        (false, false) => format!("{}\n{}", imports.trim_end(), tests.fixtures),
    }
}

pub fn localize_request(code: &str, tests: &TestSpec, imports: &str) -> RunRequest {
    RunRequest::new(RunMode::Localize, code, tests.assertion_text(), preamble(imports, tests))
}

pub fn run_tests_request(code: &str, tests: &TestSpec, imports: &str) -> RunRequest {
    RunRequest::new(RunMode::RunTests, code, tests.assertion_text(), preamble(imports, tests))
}

fn statement_text(statements: &[String], index: Option<usize>) -> Option<String> {
    index.and_then(|i| statements.get(i)).cloned()
}

/// The assertion whose literal expectation is reported: the failing one
/// when the runner names it, else the first with a literal expectation.
fn expected_value(tests: &TestSpec, failed_source: &str) -> Option<String> {
    expected_from_assertion(failed_source)
        .or_else(|| tests.assertions.iter().find_map(|a| expected_from_assertion(a)))
}

/// Maps a localize outcome onto a report. `None` means the code passed its
/// tests and needs no repair. Total over every response shape.
pub fn map_response(code: &str, tests: &TestSpec, outcome: Result<RunResponse, RunnerError>) -> Option<BugReport> {
    let statements: Vec<String> = top_level_statements(code).into_iter().map(|s| s.text).collect();
    let resp = match outcome {
        Ok(resp) => resp,
        Err(RunnerError::Timeout(secs)) => {
            let mut r = BugReport::new(BugKind::Runtime, tests);
            r.last_executed_source = NOTHING_EXECUTED.into();
            r.first_failed_source = STATEMENT_UNKNOWN.into();
            r.note = Some(format!("the runner gave no answer within {secs:.1}s; the code may not terminate"));
            return Some(r);
        }
        Err(RunnerError::Crashed { stderr }) => {
            let mut r = BugReport::new(BugKind::Unknown, tests);
            r.stderr_raw = stderr;
            r.note = Some("the runner crashed while executing the code".into());
            return Some(r);
        }
        Err(e) => {
            let mut r = BugReport::new(BugKind::Unknown, tests);
            r.note = Some(format!("runner unavailable: {e}"));
            return Some(r);
        }
    };

    let runtime_sources = |r: &mut BugReport| {
        r.first_failed_source = statement_text(&statements, resp.first_failed_index)
            .or_else(|| (!resp.failed_source.is_empty()).then(|| resp.failed_source.clone()))
            .unwrap_or_else(|| STATEMENT_UNKNOWN.into());
        r.last_executed_source = match resp.first_failed_index {
            Some(0) => NOTHING_EXECUTED.into(),
            _ => statement_text(&statements, resp.last_executed_index).unwrap_or_else(|| NOTHING_EXECUTED.into()),
        };
        if !resp.failed_source.is_empty() && resp.failed_source != r.first_failed_source {
            r.failed_node = resp.failed_source.clone();
        }
    };

    let mut report = match (resp.status, resp.kind) {
        (RunStatus::Ok, FailureKind::None) if resp.passed => {
            if !tests.is_empty() {
                return None;
            }
            // Nothing to check against: only stderr can say anything.
            let mut r = BugReport::new(BugKind::Unknown, tests);
            r.note = Some("no example tests were found, so the code ran without a check".into());
            r
        }
        (RunStatus::Ok, FailureKind::None) => {
            let mut r = BugReport::new(BugKind::Unknown, tests);
            r.note = Some("the runner reported a failure without classifying it".into());
            r
        }
        (RunStatus::Ok, FailureKind::Runtime) => {
            let mut r = BugReport::new(BugKind::Runtime, tests);
            runtime_sources(&mut r);
            r
        }
        (RunStatus::Ok, FailureKind::Assertion) => {
            if resp.captured_value_repr.is_empty() {
                let mut r = BugReport::new(BugKind::Unknown, tests);
                r.note = Some("assertion failure reported without a captured value".into());
                r
            } else {
                let mut r = BugReport::new(BugKind::Assertion, tests);
                r.captured_value_repr = resp.captured_value_repr.clone();
                r.expected_repr = expected_value(tests, &resp.failed_source);
                r.last_executed_source = statements.last().cloned().unwrap_or_default();
                r.failed_node = resp.failed_source.clone();
                r
            }
        }
        (RunStatus::Timeout, _) => {
            let mut r = BugReport::new(BugKind::Runtime, tests);
            runtime_sources(&mut r);
            let at = resp.first_failed_index.map_or_else(|| "an unknown statement".to_string(), |i| format!("statement {i}"));
            r.note = Some(format!("execution timed out at {at}"));
            r
        }
        (RunStatus::Error, _) => {
            let mut r = BugReport::new(BugKind::Unknown, tests);
            r.note = resp.message.clone().or_else(|| Some("the runner rejected the request".into()));
            r
        }
    };
    report.stderr_raw = resp.stderr;
    Some(report)
}

/// Localizes the failure of `code` against `tests` through `runner`.
/// Returns `None` when the code passes its (non-empty) tests.
pub fn enrich(code: &str, tests: &TestSpec, imports: &str, runner: &mut dyn Runner) -> Option<BugReport> {
    let request = localize_request(code, tests, imports);
    let outcome = runner.run(&request);
    if let Err(e) = &outcome {
        log::warn!("localize failed: {e}");
    }
    map_response(code, tests, outcome)
}
