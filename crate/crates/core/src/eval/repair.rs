use serde::{Deserialize, Serialize};

use super::task::TaskRecord;
use super::EvalError;
use crate::bug::{enrich, run_tests_request, BugReport, RunStatus, Runner};
use crate::kg::KnowledgeGraph;
use crate::llm::{prompt_sha256, ChatExchange, LlmClient, Usage};
use crate::prompt::{build, build_with_explanation, extract_code, PromptInputs, PromptMode, RepairPrompt};
use crate::retrieval::{
    extract_invocations, order_by_failure, retrieve_all, retrieve_all_plain_text, ApiKnowledge, PlainTextCorpus,
    RetrievalScope, RichnessLevel,
};

/// Where API knowledge comes from.
#[derive(Clone, Copy, Debug)]
pub enum KnowledgeSource<'a> {
    Graph(&'a KnowledgeGraph),
    /// Fixed-size windows over raw documentation text.
    PlainText(&'a PlainTextCorpus),
    /// Only valid for modes that use no API knowledge.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairSettings {
    pub mode: PromptMode,
    pub richness: RichnessLevel,
    pub scope: RetrievalScope,
    /// Per-request runner timeout.
    pub timeout_s: f64,
}

impl RepairSettings {
    pub fn new(mode: PromptMode) -> Self {
        Self { mode, richness: RichnessLevel::default(), scope: RetrievalScope::default(), timeout_s: 10.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    /// The patch passed the tests.
    Fixed,
    /// A patch was produced and tested, but failed.
    Failed,
    /// The original code already passes its tests; not counted.
    NotBuggy,
    /// The response held no fenced code block.
    NoCode,
    LlmError,
    PromptError,
    /// The patch could not be run.
    RunnerError,
}

/// A reference to one model exchange; full exchanges live in the transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExchangeRef {
    pub prompt_sha256: String,
    pub usage: Option<Usage>,
    pub latency_s: f64,
}

impl From<&ChatExchange> for ExchangeRef {
    fn from(ex: &ChatExchange) -> Self {
        Self { prompt_sha256: prompt_sha256(&ex.prompt), usage: ex.usage, latency_s: ex.latency_s }
    }
}

/// One ledger line: the result of repairing one task once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairOutcome {
    pub task_id: String,
    pub library: String,
    pub mode: PromptMode,
    pub richness: RichnessLevel,
    pub repetition: usize,
    pub status: OutcomeStatus,
    pub patched_code: String,
    /// Set only from running the patch against the tests.
    pub passed: bool,
    /// Passed without any test to check against: needs a manual look.
    pub flagged_for_review: bool,
    pub exchanges: Vec<ExchangeRef>,
    #[serde(default)]
    pub bug_report: Option<BugReport>,
    #[serde(default)]
    pub note: Option<String>,
}

impl RepairOutcome {
    fn new(task: &TaskRecord, settings: &RepairSettings, repetition: usize, status: OutcomeStatus) -> Self {
        Self {
            task_id: task.id.clone(),
            library: task.library.clone(),
            mode: settings.mode,
            richness: settings.richness,
            repetition,
            status,
            patched_code: String::new(),
            passed: false,
            flagged_for_review: false,
            exchanges: Vec::new(),
            bug_report: None,
            note: None,
        }
    }

    /// Counted towards the task total (everything but not-buggy skips).
    pub fn counts(&self) -> bool {
        self.status != OutcomeStatus::NotBuggy
    }
}

fn api_knowledge(
    task: &TaskRecord,
    settings: &RepairSettings,
    source: KnowledgeSource<'_>,
    failing_source: Option<&str>,
) -> Result<ApiKnowledge, EvalError> {
    // Imports live beside the snippet; aliases need both.
    let code = if task.imports.trim().is_empty() {
        task.buggy_code.clone()
    } else {
        format!("{}\n{}", task.imports.trim_end(), task.buggy_code)
    };
    let (_, invocations) = extract_invocations(&code);
    let resolved: Vec<_> = invocations.into_iter().filter(|i| i.resolved).collect();
    let ordered = order_by_failure(&resolved, failing_source, settings.scope);
    match source {
        KnowledgeSource::Graph(kg) => Ok(retrieve_all(kg, &ordered, settings.richness)),
        KnowledgeSource::PlainText(corpus) => Ok(retrieve_all_plain_text(corpus, &ordered)),
        KnowledgeSource::None => Err(EvalError::MissingKnowledge(settings.mode)),
    }
}

/// One single-shot repair attempt: test the original, gather evidence,
/// prompt, test the patch. Returns the outcome and the model exchanges made.
pub fn repair_task(
    task: &TaskRecord,
    settings: &RepairSettings,
    knowledge: KnowledgeSource<'_>,
    runner: &mut dyn Runner,
    client: &LlmClient,
    repetition: usize,
) -> Result<(RepairOutcome, Vec<ChatExchange>), EvalError> {
    let mode = settings.mode;
    if mode.uses_api_knowledge() && matches!(knowledge, KnowledgeSource::None) {
        return Err(EvalError::MissingKnowledge(mode));
    }
    let tests = task.tests();
    let initial = runner.run(&run_tests_request(&task.buggy_code, &tests, &task.imports).with_timeout(settings.timeout_s));
    let (stderr, failed_source) = match &initial {
        Ok(r) if r.status == RunStatus::Ok && r.passed && !tests.is_empty() => {
            let mut o = RepairOutcome::new(task, settings, repetition, OutcomeStatus::NotBuggy);
            o.note = Some("the original code passes its tests".into());
            return Ok((o, Vec::new()));
        }
        Ok(r) => (r.stderr.clone(), r.failed_source.clone()),
        Err(e) => {
            log::warn!("task {}: running the original code failed: {e}", task.id);
            (String::new(), String::new())
        }
    };

    // Localization also orders API knowledge, so ablating the bug section
    // must not change what the API section says.
    let localized = (mode.uses_bug_knowledge() || mode.uses_api_knowledge()).then(|| {
        enrich(&task.buggy_code, &tests, &task.imports, &mut *runner)
            .unwrap_or_else(|| BugReport::unknown(&tests, "localization found no failing statement"))
    });
    let failing = localized
        .as_ref()
        .map(|r| r.first_failed_source.as_str())
        .filter(|s| !s.is_empty())
        .or(Some(failed_source.as_str()));
    let api = if mode.uses_api_knowledge() { Some(api_knowledge(task, settings, knowledge, failing)?) } else { None };
    let bug_report = localized.filter(|_| mode.uses_bug_knowledge());

    let mut outcome = RepairOutcome::new(task, settings, repetition, OutcomeStatus::Failed);
    outcome.bug_report = bug_report.clone();
    let inputs = PromptInputs {
        description: &task.description,
        buggy_code: &task.buggy_code,
        stderr: Some(stderr.as_str()),
        api_knowledge: api.as_ref(),
        bug_report: bug_report.as_ref(),
    };

    let mut exchanges = Vec::new();
    let complete = |prompt: &RepairPrompt, exchanges: &mut Vec<ChatExchange>| -> Result<String, String> {
        match client.complete(&prompt.rendered) {
            Ok(ex) => {
                let text = ex.response.clone();
                exchanges.push(ex);
                Ok(text)
            }
            Err(e) => Err(e.to_string()),
        }
    };

    let response = match build(&inputs, mode, settings.richness) {
        Err(e) => Err((OutcomeStatus::PromptError, e.to_string())),
        Ok(first) => match complete(&first, &mut exchanges) {
            Err(e) => Err((OutcomeStatus::LlmError, e)),
            Ok(text) if mode.is_two_stage() => match build_with_explanation(&inputs, mode, settings.richness, &text) {
                Err(e) => Err((OutcomeStatus::PromptError, e.to_string())),
                Ok(second) => complete(&second, &mut exchanges).map_err(|e| (OutcomeStatus::LlmError, e)),
            },
            Ok(text) => Ok(text),
        },
    };
    outcome.exchanges = exchanges.iter().map(ExchangeRef::from).collect();
    let response = match response {
        Ok(r) => r,
        Err((status, note)) => {
            outcome.status = status;
            outcome.note = Some(note);
            return Ok((outcome, exchanges));
        }
    };

    let Some(patch) = extract_code(&response) else {
        outcome.status = OutcomeStatus::NoCode;
        outcome.note = Some("the response contains no fenced code block".into());
        return Ok((outcome, exchanges));
    };
    outcome.patched_code = patch;
    match runner.run(&run_tests_request(&outcome.patched_code, &tests, &task.imports).with_timeout(settings.timeout_s)) {
        Ok(r) => {
            outcome.passed = r.status == RunStatus::Ok && r.passed;
            outcome.status = if outcome.passed { OutcomeStatus::Fixed } else { OutcomeStatus::Failed };
            outcome.flagged_for_review = outcome.passed && tests.is_empty();
        }
        Err(e) => {
            outcome.status = OutcomeStatus::RunnerError;
            outcome.note = Some(format!("testing the patch failed: {e}"));
        }
    }
    Ok((outcome, exchanges))
}
