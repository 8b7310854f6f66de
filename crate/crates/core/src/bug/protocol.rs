//! Wire types of the sandbox runner's line-delimited JSON stdio protocol.

use serde::{Deserialize, Serialize};

/// Upper bound on per-request timeouts accepted by the runner.
pub const MAX_TIMEOUT_S: f64 = 60.0;

/// Characters kept from a captured value before truncation.
pub const CAPTURED_REPR_LIMIT: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    RunTests,
    Localize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub mode: RunMode,
    pub code: String,
    #[serde(default)]
    pub tests: String,
    #[serde(default)]
    pub imports: String,
    pub timeout_s: f64,
}

impl RunRequest {
    pub fn new(mode: RunMode, code: impl Into<String>, tests: impl Into<String>, imports: impl Into<String>) -> Self {
        Self { id: None, mode, code: code.into(), tests: tests.into(), imports: imports.into(), timeout_s: 10.0 }
    }

    pub fn with_timeout(mut self, timeout_s: f64) -> Self {
        self.timeout_s = timeout_s;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.timeout_s > 0.0 && self.timeout_s <= MAX_TIMEOUT_S) {
            return Err(format!("timeout_s must be in (0, {MAX_TIMEOUT_S}], got {}", self.timeout_s));
        }
        if self.mode == RunMode::Localize && self.code.trim().is_empty() {
            return Err("code must not be empty in localize mode".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Error,
    Timeout,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    #[default]
    None,
    Runtime,
    Assertion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub status: RunStatus,
    #[serde(default)]
    pub passed: bool,
    #[serde(default)]
    pub kind: FailureKind,
    #[serde(default)]
    pub last_executed_index: Option<usize>,
    #[serde(default)]
    pub first_failed_index: Option<usize>,
    #[serde(default)]
    pub failed_source: String,
    #[serde(default)]
    pub captured_value_repr: String,
    #[serde(default)]
    pub stderr: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl RunResponse {
    pub fn passed() -> Self {
        Self {
            id: None,
            status: RunStatus::Ok,
            passed: true,
            kind: FailureKind::None,
            last_executed_index: None,
            first_failed_index: None,
            failed_source: String::new(),
            captured_value_repr: String::new(),
            stderr: String::new(),
            message: None,
        }
    }

    /// Checks the cross-field invariants of a localize response.
    pub fn check_invariants(&self) -> Result<(), String> {
        match self.kind {
            FailureKind::Runtime => {
                let first = self.first_failed_index.ok_or("runtime failure without first_failed_index")?;
                let expected_last = first.checked_sub(1);
                if self.last_executed_index != expected_last {
                    return Err(format!(
                        "last_executed_index {:?} does not precede first_failed_index {first}",
                        self.last_executed_index
                    ));
                }
            }
            FailureKind::Assertion if self.captured_value_repr.is_empty() => {
                return Err("assertion failure without captured_value_repr".into());
            }
            _ => {}
        }
        if self.captured_value_repr.chars().count() > CAPTURED_REPR_LIMIT + 1 {
            return Err("captured_value_repr exceeds the truncation limit".into());
        }
        Ok(())
    }
}

/// Truncates a value repr to the protocol limit, marking the cut with `…`.
pub fn truncate_repr(repr: &str) -> String {
    if repr.chars().count() <= CAPTURED_REPR_LIMIT {
        return repr.to_string();
    }
    let mut out: String = repr.chars().take(CAPTURED_REPR_LIMIT).collect();
    out.push('…');
    out
}
