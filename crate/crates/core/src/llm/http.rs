use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{ChatBackend, ChatExchange, LlmError, ProviderConfig, Secret, Usage};

/// Chat-completions-compatible JSON over HTTP(S).
pub struct HttpBackend {
    cfg: ProviderConfig,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

/// Longest provider error body quoted in an error.
const BODY_EXCERPT: usize = 300;

impl HttpBackend {
    pub fn new(cfg: ProviderConfig) -> Result<Self, LlmError> {
        cfg.validate()?;
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs_f64(cfg.request_timeout_s)).build();
        Ok(Self { cfg, agent })
    }

    fn scrub(&self, text: &str) -> String {
        let mut out: String = text.chars().take(BODY_EXCERPT).collect();
        if let Some(key) = &self.cfg.api_key {
            out = key.scrub(&out);
        }
        out
    }

    fn classify(&self, err: ureq::Error) -> LlmError {
        match err {
            ureq::Error::Status(status, resp) => {
                let retry_after_s = resp.header("retry-after").and_then(|v| v.trim().parse::<f64>().ok());
                let body = self.scrub(&resp.into_string().unwrap_or_default());
                match status {
                    401 | 403 => LlmError::Auth(body),
                    429 => LlmError::RateLimited { retry_after_s },
                    500..=599 => LlmError::Transient(format!("HTTP {status}: {body}")),
                    _ => LlmError::Rejected { status, message: body },
                }
            }
            ureq::Error::Transport(t) => {
                let timed_out = std::error::Error::source(&t)
                    .and_then(|s| s.downcast_ref::<std::io::Error>())
                    .is_some_and(|io| matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock));
                if timed_out || t.to_string().contains("timed out") {
                    LlmError::Timeout(self.cfg.request_timeout_s)
                } else {
                    LlmError::Transient(self.scrub(&t.to_string()))
                }
            }
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, prompt: &str) -> Result<ChatExchange, LlmError> {
        let body = json!({
            "model": self.cfg.model_name,
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_output_tokens,
            "messages": [{"role": "user", "content": prompt}],
        });
        log::debug!("POST {} model={}", self.cfg.endpoint, self.cfg.model_name);
        let mut req = self.agent.post(&self.cfg.endpoint).set("Content-Type", "application/json");
        if let Some(key) = self.cfg.api_key.as_ref().map(Secret::expose) {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let started = Instant::now();
        let resp = req.send_json(body).map_err(|e| self.classify(e))?;
        let text = resp.into_string().map_err(|e| {
            if e.kind() == std::io::ErrorKind::TimedOut {
                LlmError::Timeout(self.cfg.request_timeout_s)
            } else {
                LlmError::Transient(e.to_string())
            }
        })?;
        let latency_s = started.elapsed().as_secs_f64();
        let wire: WireResponse =
            serde_json::from_str(&text).map_err(|e| LlmError::Malformed(format!("{e}: {}", self.scrub(&text))))?;
        let content = wire
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Malformed("no choices[0].message.content".into()))?;
        Ok(ChatExchange {
            prompt: prompt.to_string(),
            response: content,
            usage: wire.usage.map(|u| Usage { input_tokens: u.prompt_tokens, output_tokens: u.completion_tokens }),
            latency_s,
            provider: self.cfg.model_name.clone(),
        })
    }
}
