use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{prompt_sha256, ChatBackend, ChatExchange, LlmError, Usage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MockReply {
    pub response: String,
    /// Omitted usage makes the exchange usage-unknown.
    #[serde(default)]
    pub usage: Option<Usage>,
}

/// Matches when every given condition holds: the prompt hash equals
/// `prompt_sha256`, each `contains` string occurs, no `excludes` string occurs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excludes: Vec<String>,
    #[serde(flatten)]
    pub reply: MockReply,
}

impl MockRule {
    fn matches(&self, prompt: &str, hash: &str) -> bool {
        self.prompt_sha256.as_deref().is_none_or(|h| h.eq_ignore_ascii_case(hash))
            && self.contains.iter().all(|c| prompt.contains(c.as_str()))
            && !self.excludes.iter().any(|c| prompt.contains(c.as_str()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MockRules {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub default: Option<MockReply>,
}

/// Canned responses. The first matching rule answers; without a match the
/// default reply is used, or the request fails.
#[derive(Clone, Debug)]
pub struct MockBackend {
    rules: MockRules,
    provider: String,
}

impl MockBackend {
    pub fn new(rules: MockRules) -> Self {
        Self { rules, provider: "mock".into() }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        let rules = serde_json::from_str(&text).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self::new(rules))
    }

    /// A backend answering every prompt with `response`.
    pub fn fixed(response: impl Into<String>, usage: Option<Usage>) -> Self {
        Self::new(MockRules { rules: Vec::new(), default: Some(MockReply { response: response.into(), usage }) })
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, prompt: &str) -> Result<ChatExchange, LlmError> {
        let hash = prompt_sha256(prompt);
        let reply = self
            .rules
            .rules
            .iter()
            .find(|r| r.matches(prompt, &hash))
            .map(|r| &r.reply)
            .or(self.rules.default.as_ref())
            .ok_or_else(|| LlmError::NoRule { prompt_hash: hash.clone() })?;
        Ok(ChatExchange {
            prompt: prompt.to_string(),
            response: reply.response.clone(),
            usage: reply.usage,
            latency_s: 0.0,
            provider: self.provider.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyed_by_hash_then_contains() {
        let rules: MockRules = serde_json::from_str(&format!(
            r###"{{"rules":[
                {{"prompt_sha256":"{}","response":"by hash","usage":{{"input_tokens":3,"output_tokens":4}}}},
                {{"contains":["## Bug Knowledge"],"excludes":["## API Knowledge"],"response":"bug only"}},
                {{"contains":["## Bug Knowledge"],"response":"full"}}
            ]}}"###,
            prompt_sha256("exact prompt")
        ))
        .unwrap();
        let b = MockBackend::new(rules);
        let ex = b.complete("exact prompt").unwrap();
        assert_eq!((ex.response.as_str(), ex.usage), ("by hash", Some(Usage { input_tokens: 3, output_tokens: 4 })));
        assert_eq!(b.complete("## Bug Knowledge\nx").unwrap().response, "bug only");
        let ex = b.complete("## API Knowledge\n## Bug Knowledge").unwrap();
        assert_eq!(ex.response, "full");
        assert_eq!(ex.usage, None);
        assert!(matches!(b.complete("other"), Err(LlmError::NoRule { .. })));
    }

    #[test]
    fn default_reply() {
        let b = MockBackend::fixed("```python\nx = 1\n```", None);
        assert_eq!(b.complete("anything").unwrap().provider, "mock");
    }
}
