use serde::{Deserialize, Serialize};

use crate::pysrc::{split_top_level, tokenize, top_level_statements, TokKind};

/// Example tests taken from a task description. Never synthesized.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSpec {
    /// Setup code that must run before the assertions.
    pub fixtures: String,
    pub assertions: Vec<String>,
}

impl TestSpec {
    pub fn is_empty(&self) -> bool {
        self.assertions.is_empty()
    }

    /// The assertions as one snippet, as sent to the runner.
    pub fn assertion_text(&self) -> String {
        self.assertions.join("\n")
    }

    /// A test harness adopted verbatim (e.g. a benchmark's test code field).
    pub fn from_harness(harness: &str) -> Self {
        if harness.trim().is_empty() {
            return Self::default();
        }
        Self { fixtures: String::new(), assertions: vec![harness.trim_end().to_string()] }
    }
}

/// Contents of the fenced code blocks of a markdown-ish description.
fn fenced_blocks(description: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in description.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with("```") {
            match current.take() {
                Some(body) => blocks.push(body.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(body) = current.as_mut() {
            body.push(line);
        }
    }
    // An unclosed fence still counts as a block.
    if let Some(body) = current {
        blocks.push(body.join("\n"));
    }
    blocks
}

fn is_assertion(stmt: &str) -> bool {
    let toks = tokenize(stmt);
    toks.first().is_some_and(|t| t.kind == TokKind::Name && t.text == "assert")
}

/// Pulls example tests out of a description: `assert` statements inside
/// fenced code blocks become assertions, and the statements preceding them
/// in the same block become fixtures.
pub fn extract_tests(description: &str) -> TestSpec {
    let mut spec = TestSpec::default();
    let mut fixtures = Vec::new();
    for block in fenced_blocks(description) {
        let stmts = top_level_statements(&block);
        let Some(first_assert) = stmts.iter().position(|s| is_assertion(&s.text)) else {
            continue;
        };
        fixtures.extend(stmts[..first_assert].iter().map(|s| s.text.clone()));
        spec.assertions.extend(stmts[first_assert..].iter().filter(|s| is_assertion(&s.text)).map(|s| s.text.clone()));
    }
    spec.fixtures = fixtures.join("\n");
    spec
}

/// Fields of a DS-1000 style record that carry the test harness, in lookup order.
const HARNESS_FIELDS: &[&str] = &["test_code", "code_context", "test"];

/// Test spec for a DS-1000 style JSON record: the harness field is adopted
/// verbatim; otherwise tests are extracted from the prompt text.
pub fn extract_tests_from_record(record: &serde_json::Value) -> TestSpec {
    for field in HARNESS_FIELDS {
        if let Some(h) = record.get(field).and_then(|v| v.as_str()).filter(|h| !h.trim().is_empty()) {
            return TestSpec::from_harness(h);
        }
    }
    let description = ["description", "prompt"]
        .iter()
        .find_map(|f| record.get(f).and_then(|v| v.as_str()))
        .unwrap_or_default();
    extract_tests(description)
}

fn looks_literal(expr: &str) -> bool {
    let toks = tokenize(expr);
    if toks.iter().all(|t| t.kind == TokKind::Newline) {
        return false;
    }
    let mut prev_name = false;
    for t in &toks {
        match t.kind {
            TokKind::Op if t.text == "(" && prev_name => return false,
            TokKind::Name if !matches!(t.text, "True" | "False" | "None") => return false,
            TokKind::Op if matches!(t.text, "=" | ":=" | "." | "@" | "lambda") => return false,
            _ => {}
        }
        prev_name = t.kind == TokKind::Name;
    }
    true
}

/// Comparison helpers whose second argument is the expected value.
const EQUALITY_HELPERS: &[&str] = &[
    "array_equal",
    "allclose",
    "assert_array_equal",
    "assert_array_almost_equal",
    "assert_allclose",
    "assert_frame_equal",
    "assert_series_equal",
    "assert_equal",
    "isclose",
];

/// The expected value of an assertion when it is a literal, e.g. the `[1, 2]`
/// in `assert result == [1, 2]` or in `np.testing.assert_array_equal(result, [1, 2])`.
pub fn expected_from_assertion(assertion: &str) -> Option<String> {
    let body = assertion.trim();
    let body = body.strip_prefix("assert").map(str::trim_start).unwrap_or(body);
    // drop an assertion message
    let condition = split_top_level(body, ",").into_iter().next()?.trim();

    let sides = split_top_level(condition, "==");
    if sides.len() == 2 {
        let rhs = sides[1].trim();
        let lhs = sides[0].trim();
        if looks_literal(rhs) {
            return Some(rhs.to_string());
        }
        if looks_literal(lhs) {
            return Some(lhs.to_string());
        }
        return None;
    }

    // helper(actual, expected)
    let open = condition.find('(')?;
    let callee = condition[..open].trim();
    let name = callee.rsplit('.').next()?;
    if !EQUALITY_HELPERS.contains(&name) || !condition.ends_with(')') {
        return None;
    }
    let args = &condition[open + 1..condition.len() - 1];
    let args = split_top_level(args, ",");
    let expected = args.get(1)?.trim();
    looks_literal(expected).then(|| expected.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_assert_in_block() {
        let d = "Compute the answer.\n```python\nassert f(2) == 4\n```\n";
        let spec = extract_tests(d);
        assert_eq!(spec.assertions, vec!["assert f(2) == 4"]);
        assert!(spec.fixtures.is_empty());
    }

    #[test]
    fn no_blocks_no_tests() {
        let spec = extract_tests("Just prose, assert nothing.");
        assert!(spec.is_empty());
        assert_eq!(spec, TestSpec::default());
    }

    #[test]
    fn fixtures_precede_assertions() {
        let d = "Example:\n```\nimport numpy as np\na = np.arange(4)\nassert g(a) == [3, 2, 1, 0]\nassert len(g(a)) == 4\n```\nAnother block without tests:\n```\nprint(1)\n```";
        let spec = extract_tests(d);
        assert_eq!(spec.fixtures, "import numpy as np\na = np.arange(4)");
        assert_eq!(spec.assertions.len(), 2);
    }

    #[test]
    fn ds1000_record_harness_verbatim() {
        let harness = "def test_execution(solution: str):\n    code = exec_context.replace(\"[insert]\", solution)\n    assert result == expected\n";
        let rec = serde_json::json!({
            "prompt": "Problem:\n```\nassert 1 == 2\n```",
            "code_context": harness,
            "metadata": {"library": "Numpy", "problem_id": 291}
        });
        let spec = extract_tests_from_record(&rec);
        assert_eq!(spec.assertions, vec![harness.trim_end()]);
        let rec = serde_json::json!({"prompt": "```\nassert x == 1\n```"});
        assert_eq!(extract_tests_from_record(&rec).assertions, vec!["assert x == 1"]);
    }

    #[test]
    fn expected_values() {
        assert_eq!(expected_from_assertion("assert result == [1, 2, 3]").as_deref(), Some("[1, 2, 3]"));
        assert_eq!(expected_from_assertion("assert 4 == f(2)").as_deref(), Some("4"));
        assert_eq!(expected_from_assertion("assert x == 'a,b', 'message'").as_deref(), Some("'a,b'"));
        assert_eq!(
            expected_from_assertion("np.testing.assert_array_equal(result, [[3, 4], [1, 2]])").as_deref(),
            Some("[[3, 4], [1, 2]]")
        );
        assert_eq!(expected_from_assertion("assert result == expected"), None);
        assert_eq!(expected_from_assertion("assert np.array_equal(result, np.array([1]))"), None);
        assert_eq!(expected_from_assertion("assert result is None"), None);
        assert_eq!(expected_from_assertion("assert (-1.5, None) == r").as_deref(), Some("(-1.5, None)"));
    }
}
