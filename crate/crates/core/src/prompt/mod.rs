//! Repair prompt construction for the full pipeline, its ablations and the
//! baseline repair strategies.
//!
//! Section bodies come from the text templates under `templates/`, which use
//! `{{name}}` slots. A template line holding only a slot that renders empty is
//! dropped, so optional evidence never leaves blank gaps.

mod stderr;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bug::{BugKind, BugReport};
use crate::retrieval::{ApiKnowledge, RichnessLevel};

pub use stderr::{clean_stderr, is_warning_line, strip_paths};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Dsrepair,
    DsrepairWoApi,
    DsrepairWoBug,
    DsrepairWoApiBug,
    SelfDebuggingS,
    SelfDebuggingE,
    ChatRepair,
    SelfRepair,
}

impl PromptMode {
    pub const ALL: [PromptMode; 8] = [
        Self::Dsrepair,
        Self::DsrepairWoApi,
        Self::DsrepairWoBug,
        Self::DsrepairWoApiBug,
        Self::SelfDebuggingS,
        Self::SelfDebuggingE,
        Self::ChatRepair,
        Self::SelfRepair,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dsrepair => "dsrepair",
            Self::DsrepairWoApi => "dsrepair_wo_api",
            Self::DsrepairWoBug => "dsrepair_wo_bug",
            Self::DsrepairWoApiBug => "dsrepair_wo_api_bug",
            Self::SelfDebuggingS => "self_debugging_s",
            Self::SelfDebuggingE => "self_debugging_e",
            Self::ChatRepair => "chat_repair",
            Self::SelfRepair => "self_repair",
        }
    }

    /// Full pipeline or one of its ablations.
    pub fn is_dsrepair(self) -> bool {
        matches!(self, Self::Dsrepair | Self::DsrepairWoApi | Self::DsrepairWoBug | Self::DsrepairWoApiBug)
    }

    pub fn uses_api_knowledge(self) -> bool {
        matches!(self, Self::Dsrepair | Self::DsrepairWoBug)
    }

    pub fn uses_bug_knowledge(self) -> bool {
        matches!(self, Self::Dsrepair | Self::DsrepairWoApi)
    }

    /// Modes that first ask for an explanation, then for the repair.
    pub fn is_two_stage(self) -> bool {
        matches!(self, Self::SelfDebuggingE | Self::SelfRepair)
    }

    pub fn requires_stderr(self) -> bool {
        matches!(self, Self::ChatRepair | Self::SelfRepair)
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}`; expected one of: {}", Self::ALL.map(Self::as_str).join(", ")))
    }
}

pub const PROBLEM_DESCRIPTION: &str = "Problem Description";
pub const INCORRECT_CODE: &str = "Incorrect Code";
pub const ERROR_MESSAGE: &str = "Error Message";
pub const API_KNOWLEDGE: &str = "API Knowledge";
pub const BUG_KNOWLEDGE: &str = "Bug Knowledge";
pub const FACT_CHECKING: &str = "Fact Checking";
pub const RESPONSE_FORMAT: &str = "Response Format";
pub const FEEDBACK: &str = "Feedback";
pub const EXECUTION_RESULT: &str = "Execution Result";
pub const EXPLANATION_REQUEST: &str = "Explanation Request";
pub const EXPLANATION: &str = "Explanation";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub header: String,
    pub body: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairPrompt {
    pub sections: Vec<Section>,
    pub mode: PromptMode,
    pub richness: RichnessLevel,
    pub rendered: String,
}

impl RepairPrompt {
    fn new(sections: Vec<Section>, mode: PromptMode, richness: RichnessLevel) -> Self {
        let rendered = render_sections(&sections);
        Self { sections, mode, richness, rendered }
    }

    pub fn headers(&self) -> Vec<&str> {
        self.sections.iter().map(|s| s.header.as_str()).collect()
    }

    pub fn section(&self, header: &str) -> Option<&str> {
        self.sections.iter().find(|s| s.header == header).map(|s| s.body.as_str())
    }
}

fn render_sections(sections: &[Section]) -> String {
    let mut out = String::new();
    for (i, s) in sections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str("## ");
        out.push_str(&s.header);
        out.push('\n');
        out.push_str(&s.body);
        out.push('\n');
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("mode {mode} needs input for the {section} section")]
    MissingInput { mode: PromptMode, section: &'static str },
    #[error("mode {0} has no explanation stage")]
    NotTwoStage(PromptMode),
}

/// Everything a prompt may draw on. Which fields are required depends on the mode.
#[derive(Clone, Copy, Debug, Default)]
pub struct PromptInputs<'a> {
    pub description: &'a str,
    pub buggy_code: &'a str,
    /// Raw error output of running the code against its tests.
    pub stderr: Option<&'a str>,
    pub api_knowledge: Option<&'a ApiKnowledge>,
    pub bug_report: Option<&'a BugReport>,
}

mod tpl {
    pub const PROBLEM_DESCRIPTION: &str = include_str!("../../templates/problem_description.txt");
    pub const INCORRECT_CODE: &str = include_str!("../../templates/incorrect_code.txt");
    pub const ERROR_MESSAGE: &str = include_str!("../../templates/error_message.txt");
    pub const ERROR_MESSAGE_EMPTY: &str = include_str!("../../templates/error_message_empty.txt");
    pub const API_KNOWLEDGE: &str = include_str!("../../templates/api_knowledge.txt");
    pub const API_KNOWLEDGE_EMPTY: &str = include_str!("../../templates/api_knowledge_empty.txt");
    pub const BUG_RUNTIME: &str = include_str!("../../templates/bug_knowledge_runtime.txt");
    pub const BUG_ASSERTION: &str = include_str!("../../templates/bug_knowledge_assertion.txt");
    pub const BUG_UNKNOWN: &str = include_str!("../../templates/bug_knowledge_unknown.txt");
    pub const FACT_CHECKING: &str = include_str!("../../templates/fact_checking.txt");
    pub const RESPONSE_FORMAT: &str = include_str!("../../templates/response_format.txt");
    pub const FEEDBACK_SIMPLE: &str = include_str!("../../templates/feedback_simple.txt");
    pub const EXECUTION_RESULT: &str = include_str!("../../templates/execution_result.txt");
    pub const EXPLAIN_LINES: &str = include_str!("../../templates/explain_lines.txt");
    pub const EXPLAIN_FAILURE: &str = include_str!("../../templates/explain_failure.txt");
    pub const EXPLANATION: &str = include_str!("../../templates/explanation.txt");
}

/// Fills `{{name}}` slots. A line consisting of one slot whose value is
/// empty is removed.
pub fn fill_template(template: &str, slots: &[(&str, &str)]) -> String {
    let lookup = |name: &str| slots.iter().find(|(k, _)| *k == name).map(|(_, v)| *v);
    let mut lines = Vec::new();
    for line in template.trim_end_matches('\n').split('\n') {
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix("{{").and_then(|r| r.strip_suffix("}}")) {
            if !name.contains('{') && lookup(name).is_some_and(str::is_empty) {
                continue;
            }
        }
        let mut out = String::with_capacity(line.len());
        let mut rest = line;
        while let Some(open) = rest.find("{{") {
            let Some(close) = rest[open..].find("}}").map(|c| c + open) else { break };
            let name = &rest[open + 2..close];
            out.push_str(&rest[..open]);
            match lookup(name) {
                Some(v) => out.push_str(v),
                None => panic!("template slot `{name}` has no value"),
            }
            rest = &rest[close + 2..];
        }
        out.push_str(rest);
        lines.push(out);
    }
    lines.join("\n")
}

fn section(header: &str, body: String) -> Section {
    Section { header: header.to_string(), body }
}

fn fixed(header: &str, template: &str) -> Section {
    section(header, fill_template(template, &[]))
}

fn tests_block(report: &BugReport) -> String {
    if report.test_text.trim().is_empty() {
        "No example tests were given in the problem description.".to_string()
    } else {
        format!("The code was checked with these tests:\n```python\n{}\n```", report.test_text.trim_end())
    }
}

/// Verbalizes a bug report as the Bug Knowledge section body.
pub fn render_bug_knowledge(report: &BugReport) -> String {
    let tests = tests_block(report);
    let note = report.note.as_deref().map(|n| format!("Note: {n}.")).unwrap_or_default();
    match report.kind {
        BugKind::Runtime => {
            let node = if report.failed_node.is_empty() {
                String::new()
            } else {
                format!("Within that statement, the failing call is `{}`.", report.failed_node)
            };
            fill_template(
                tpl::BUG_RUNTIME,
                &[
                    ("tests", &tests),
                    ("last_executed", &report.last_executed_source),
                    ("first_failed", &report.first_failed_source),
                    ("failed_node", &node),
                    ("note", &note),
                ],
            )
        }
        BugKind::Assertion => {
            let expected = report
                .expected_repr
                .as_deref()
                .map(|e| format!("The expected output is:\n```\n{e}\n```"))
                .unwrap_or_default();
            fill_template(
                tpl::BUG_ASSERTION,
                &[("tests", &tests), ("captured", &report.captured_value_repr), ("expected", &expected), ("note", &note)],
            )
        }
        BugKind::Unknown => fill_template(tpl::BUG_UNKNOWN, &[("tests", &tests), ("note", &note)]),
    }
}

/// The API Knowledge section body for retrieved knowledge.
pub fn render_api_knowledge(knowledge: &ApiKnowledge) -> String {
    let rendered = knowledge.render();
    if rendered.is_empty() {
        return fill_template(tpl::API_KNOWLEDGE_EMPTY, &[]);
    }
    let unresolved = if knowledge.unresolved.is_empty() {
        String::new()
    } else {
        let names: Vec<String> = knowledge.unresolved.iter().map(|n| format!("`{n}`")).collect();
        format!("No documentation was found for: {}.", names.join(", "))
    };
    fill_template(tpl::API_KNOWLEDGE, &[("knowledge", &rendered), ("unresolved", &unresolved)])
}

fn error_message(stderr: Option<&str>) -> String {
    let cleaned = stderr.map(clean_stderr).unwrap_or_default();
    if cleaned.is_empty() {
        fill_template(tpl::ERROR_MESSAGE_EMPTY, &[])
    } else {
        fill_template(tpl::ERROR_MESSAGE, &[("stderr", &cleaned)])
    }
}

fn required_stderr<'a>(inputs: &PromptInputs<'a>, mode: PromptMode) -> Result<&'a str, PromptError> {
    inputs
        .stderr
        .filter(|s| !s.trim().is_empty())
        .ok_or(PromptError::MissingInput { mode, section: EXECUTION_RESULT })
}

fn head_sections(inputs: &PromptInputs<'_>) -> Vec<Section> {
    vec![
        section(PROBLEM_DESCRIPTION, fill_template(tpl::PROBLEM_DESCRIPTION, &[("description", inputs.description.trim_end())])),
        section(INCORRECT_CODE, fill_template(tpl::INCORRECT_CODE, &[("code", inputs.buggy_code.trim_end())])),
    ]
}

fn dsrepair_sections(inputs: &PromptInputs<'_>, mode: PromptMode) -> Result<Vec<Section>, PromptError> {
    let mut sections = head_sections(inputs);
    sections.push(section(ERROR_MESSAGE, error_message(inputs.stderr)));
    if mode.uses_api_knowledge() {
        let k = inputs.api_knowledge.ok_or(PromptError::MissingInput { mode, section: API_KNOWLEDGE })?;
        sections.push(section(API_KNOWLEDGE, render_api_knowledge(k)));
    }
    if mode.uses_bug_knowledge() {
        let r = inputs.bug_report.ok_or(PromptError::MissingInput { mode, section: BUG_KNOWLEDGE })?;
        sections.push(section(BUG_KNOWLEDGE, render_bug_knowledge(r)));
    }
    sections.push(fixed(FACT_CHECKING, tpl::FACT_CHECKING));
    sections.push(fixed(RESPONSE_FORMAT, tpl::RESPONSE_FORMAT));
    Ok(sections)
}

fn execution_result(stderr: &str) -> Section {
    // Baselines see the raw output: cleaning is part of the full pipeline only.
    section(EXECUTION_RESULT, fill_template(tpl::EXECUTION_RESULT, &[("stderr", stderr.trim_end())]))
}

/// Builds the prompt for a mode. For two-stage modes this is the first,
/// explanation-requesting prompt; see [`build_with_explanation`].
pub fn build(inputs: &PromptInputs<'_>, mode: PromptMode, richness: RichnessLevel) -> Result<RepairPrompt, PromptError> {
    let sections = match mode {
        m if m.is_dsrepair() => dsrepair_sections(inputs, m)?,
        PromptMode::SelfDebuggingS => {
            let mut s = head_sections(inputs);
            s.push(fixed(FEEDBACK, tpl::FEEDBACK_SIMPLE));
            s.push(fixed(RESPONSE_FORMAT, tpl::RESPONSE_FORMAT));
            s
        }
        PromptMode::SelfDebuggingE => {
            let mut s = head_sections(inputs);
            s.push(fixed(EXPLANATION_REQUEST, tpl::EXPLAIN_LINES));
            s
        }
        PromptMode::ChatRepair => {
            let stderr = required_stderr(inputs, mode)?;
            let mut s = head_sections(inputs);
            s.push(execution_result(stderr));
            s.push(fixed(RESPONSE_FORMAT, tpl::RESPONSE_FORMAT));
            s
        }
        PromptMode::SelfRepair => {
            let stderr = required_stderr(inputs, mode)?;
            let mut s = head_sections(inputs);
            s.push(execution_result(stderr));
            s.push(fixed(EXPLANATION_REQUEST, tpl::EXPLAIN_FAILURE));
            s
        }
        _ => unreachable!("dsrepair modes handled above"),
    };
    Ok(RepairPrompt::new(sections, mode, richness))
}

/// Second stage of a two-stage mode: the repair prompt embedding the
/// explanation the model returned for the first prompt.
pub fn build_with_explanation(
    inputs: &PromptInputs<'_>,
    mode: PromptMode,
    richness: RichnessLevel,
    explanation: &str,
) -> Result<RepairPrompt, PromptError> {
    let mut s = head_sections(inputs);
    match mode {
        PromptMode::SelfDebuggingE => {
            s.push(section(EXPLANATION, fill_template(tpl::EXPLANATION, &[("explanation", explanation.trim())])));
            s.push(fixed(FEEDBACK, tpl::FEEDBACK_SIMPLE));
        }
        PromptMode::SelfRepair => {
            s.push(execution_result(required_stderr(inputs, mode)?));
            s.push(section(EXPLANATION, fill_template(tpl::EXPLANATION, &[("explanation", explanation.trim())])));
        }
        other => return Err(PromptError::NotTwoStage(other)),
    }
    s.push(fixed(RESPONSE_FORMAT, tpl::RESPONSE_FORMAT));
    Ok(RepairPrompt::new(s, mode, richness))
}

/// Code from the first fenced block of a model response. Python-tagged
/// blocks are preferred over blocks in other languages.
pub fn extract_code(response: &str) -> Option<String> {
    let mut blocks: Vec<(String, String)> = Vec::new();
    let mut current: Option<(String, Vec<&str>)> = None;
    for line in response.lines() {
        let trimmed = line.trim_start();
        if let Some(tag) = trimmed.strip_prefix("```") {
            match current.take() {
                Some((lang, body)) => blocks.push((lang, body.join("\n"))),
                None => current = Some((tag.trim().to_ascii_lowercase(), Vec::new())),
            }
        } else if let Some((_, body)) = current.as_mut() {
            body.push(line);
        }
    }
    let pythonish = |lang: &str| matches!(lang, "" | "python" | "py" | "python3");
    blocks
        .iter()
        .find(|(lang, _)| pythonish(lang))
        .or(blocks.first())
        .map(|(_, body)| body.trim_matches('\n').to_string())
        .filter(|b| !b.trim().is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> BugReport {
        BugReport {
            kind: BugKind::Runtime,
            test_text: "assert f() == 1".into(),
            last_executed_source: "a = 1".into(),
            first_failed_source: "b = a + c".into(),
            failed_node: String::new(),
            captured_value_repr: String::new(),
            expected_repr: None,
            stderr_raw: String::new(),
            note: None,
        }
    }

    fn inputs<'a>(k: &'a ApiKnowledge, r: &'a BugReport) -> PromptInputs<'a> {
        PromptInputs {
            description: "Add one.",
            buggy_code: "a = 1\nb = a + c",
            stderr: Some("NameError: name 'c' is not defined"),
            api_knowledge: Some(k),
            bug_report: Some(r),
        }
    }

    #[test]
    fn dsrepair_has_seven_sections() {
        let k = ApiKnowledge::default();
        let r = report();
        let p = build(&inputs(&k, &r), PromptMode::Dsrepair, RichnessLevel::ExpressionOnly).unwrap();
        assert_eq!(
            p.headers(),
            [PROBLEM_DESCRIPTION, INCORRECT_CODE, ERROR_MESSAGE, API_KNOWLEDGE, BUG_KNOWLEDGE, FACT_CHECKING, RESPONSE_FORMAT]
        );
        assert!(p.rendered.starts_with("## Problem Description\nAdd one.\n\n## Incorrect Code\n```python\n"));
        assert!(p.section(FACT_CHECKING).unwrap().contains("violates the corresponding requirements"));
    }

    #[test]
    fn wo_api_bug_has_five_sections() {
        let p = build(
            &PromptInputs { description: "d", buggy_code: "c", ..Default::default() },
            PromptMode::DsrepairWoApiBug,
            RichnessLevel::default(),
        )
        .unwrap();
        assert_eq!(p.sections.len(), 5);
        assert!(p.section(API_KNOWLEDGE).is_none() && p.section(BUG_KNOWLEDGE).is_none());
    }

    #[test]
    fn simple_feedback_sentence() {
        let p = build(&PromptInputs { description: "d", buggy_code: "c", ..Default::default() }, PromptMode::SelfDebuggingS, RichnessLevel::default())
            .unwrap();
        assert!(p.rendered.contains("The generated code is incorrect. Please fix the code."));
    }

    #[test]
    fn missing_inputs_name_the_section() {
        let bare = PromptInputs { description: "d", buggy_code: "c", ..Default::default() };
        assert_eq!(
            build(&bare, PromptMode::Dsrepair, RichnessLevel::default()).unwrap_err(),
            PromptError::MissingInput { mode: PromptMode::Dsrepair, section: API_KNOWLEDGE }
        );
        assert_eq!(
            build(&bare, PromptMode::DsrepairWoApi, RichnessLevel::default()).unwrap_err(),
            PromptError::MissingInput { mode: PromptMode::DsrepairWoApi, section: BUG_KNOWLEDGE }
        );
        for m in [PromptMode::ChatRepair, PromptMode::SelfRepair] {
            assert!(matches!(build(&bare, m, RichnessLevel::default()), Err(PromptError::MissingInput { section: EXECUTION_RESULT, .. })));
        }
        assert_eq!(
            build_with_explanation(&bare, PromptMode::Dsrepair, RichnessLevel::default(), "x").unwrap_err(),
            PromptError::NotTwoStage(PromptMode::Dsrepair)
        );
    }

    #[test]
    fn two_stage_modes() {
        let with_err = PromptInputs { description: "d", buggy_code: "c", stderr: Some("E"), ..Default::default() };
        for m in [PromptMode::SelfDebuggingE, PromptMode::SelfRepair] {
            let first = build(&with_err, m, RichnessLevel::default()).unwrap();
            assert!(first.section(EXPLANATION_REQUEST).is_some());
            assert!(first.section(RESPONSE_FORMAT).is_none());
            let second = build_with_explanation(&with_err, m, RichnessLevel::default(), "because\n").unwrap();
            assert_eq!(second.section(EXPLANATION), Some("because"));
            assert!(second.section(RESPONSE_FORMAT).is_some());
        }
    }

    #[test]
    fn template_slots() {
        assert_eq!(fill_template("a\n{{x}}\nb {{y}}\n", &[("x", ""), ("y", "1")]), "a\nb 1");
        assert_eq!(fill_template("{{x}}", &[("x", "v\nw")]), "v\nw");
    }

    #[test]
    #[should_panic(expected = "no value")]
    fn unfilled_slot_panics() {
        fill_template("{{missing}}", &[]);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in PromptMode::ALL {
            assert_eq!(m.as_str().parse::<PromptMode>().unwrap(), m);
            assert_eq!(serde_json::to_value(m).unwrap(), m.as_str());
        }
        assert!("DSrepair".parse::<PromptMode>().is_err());
    }

    #[test]
    fn code_extraction() {
        assert_eq!(extract_code("Fixed:\n```python\nx = 1\n```\n").as_deref(), Some("x = 1"));
        assert_eq!(extract_code("```text\nlog\n```\n```\ny = 2\n```").as_deref(), Some("y = 2"));
        assert_eq!(extract_code("```sh\nls\n```").as_deref(), Some("ls"));
        assert_eq!(extract_code("no code here"), None);
        assert_eq!(extract_code("```python\n```"), None);
        // unterminated fences are not accepted
        assert_eq!(extract_code("```python\nx = 1"), None);
    }

    #[test]
    fn bug_knowledge_variants() {
        let mut r = report();
        let text = render_bug_knowledge(&r);
        assert!(text.contains("```python\na = 1\n```"));
        assert!(!text.contains("Note:"));
        r.kind = BugKind::Assertion;
        r.captured_value_repr = "array([2, 1])".into();
        r.expected_repr = Some("[1, 2]".into());
        let text = render_bug_knowledge(&r);
        assert!(text.contains("array([2, 1])") && text.contains("The expected output is:\n```\n[1, 2]\n```"));
        r.kind = BugKind::Unknown;
        r.test_text.clear();
        r.note = Some("runner unavailable".into());
        assert_eq!(
            render_bug_knowledge(&r),
            "No example tests were given in the problem description.\nThe failing statement could not be located by executing the code.\nNote: runner unavailable."
        );
    }
}
