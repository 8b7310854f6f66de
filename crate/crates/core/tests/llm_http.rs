//! The HTTP backend against a local stub server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use dsrepair::llm::{ChatBackend, HttpBackend, LlmClient, LlmError, ProviderConfig, Secret, Usage};

struct Reply {
    status: u16,
    body: String,
    delay_ms: u64,
    headers: Vec<(String, String)>,
}

fn reply(status: u16, body: &str) -> Reply {
    Reply { status, body: body.into(), delay_ms: 0, headers: Vec::new() }
}

/// Serves one scripted reply per connection; returns the endpoint and the
/// raw requests seen.
fn stub(replies: Vec<Reply>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for r in replies {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut content_length = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap_or(0);
                }
                head.push_str(&line);
            }
            let mut body = vec![0; content_length];
            reader.read_exact(&mut body).unwrap();
            head.push_str("\r\n");
            head.push_str(&String::from_utf8_lossy(&body));
            log.lock().unwrap().push(head);
            thread::sleep(Duration::from_millis(r.delay_ms));
            let mut out = stream;
            let extra: String = r.headers.iter().map(|(k, v)| format!("{k}: {v}\r\n")).collect();
            let _ = write!(
                out,
                "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n{extra}\r\n{}",
                r.status,
                r.body.len(),
                r.body
            );
        }
    });
    (format!("http://{addr}/v1/chat/completions"), seen)
}

const OK_BODY: &str = r#"{"id":"x","choices":[{"index":0,"message":{"role":"assistant","content":"```python\nx = 1\n```"}}],"usage":{"prompt_tokens":812,"completion_tokens":97,"total_tokens":909}}"#;
const KEY: &str = "sk-test-0123456789";

fn config(endpoint: &str) -> ProviderConfig {
    let mut cfg = ProviderConfig::new(endpoint, "gpt-4o-mini-2024-07-18");
    cfg.api_key = Some(Secret::new(KEY));
    cfg.request_timeout_s = 2.0;
    cfg.retries = 2;
    cfg.backoff_s = 0.0;
    cfg
}

#[test]
fn exchange_carries_stub_usage() {
    let (endpoint, seen) = stub(vec![reply(200, OK_BODY)]);
    let backend = HttpBackend::new(config(&endpoint)).unwrap();
    let ex = backend.complete("fix this").unwrap();
    assert_eq!(ex.response, "```python\nx = 1\n```");
    assert_eq!(ex.usage, Some(Usage { input_tokens: 812, output_tokens: 97 }));
    assert_eq!(ex.provider, "gpt-4o-mini-2024-07-18");

    let req = seen.lock().unwrap()[0].clone();
    assert!(req.starts_with("POST /v1/chat/completions"));
    assert!(req.contains(&format!("Bearer {KEY}")));
    let body: serde_json::Value = serde_json::from_str(req.split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0]["content"], "fix this");
    assert_eq!(body["model"], "gpt-4o-mini-2024-07-18");
    assert!(body["max_tokens"].is_u64());

    // the exchange never carries the key
    assert!(!serde_json::to_string(&ex).unwrap().contains(KEY));
}

#[test]
fn missing_usage_is_unknown() {
    let (endpoint, _) = stub(vec![reply(200, r#"{"choices":[{"message":{"content":"ok"}}]}"#)]);
    let ex = HttpBackend::new(config(&endpoint)).unwrap().complete("p").unwrap();
    assert_eq!(ex.usage, None);
}

#[test]
fn error_classes() {
    let echo_key = format!(r#"{{"error":"invalid key {KEY}"}}"#);
    let (endpoint, _) = stub(vec![
        reply(401, &echo_key),
        reply(500, "{}"),
        reply(200, "not json"),
        reply(200, r#"{"choices":[]}"#),
        reply(400, r#"{"error":"context length"}"#),
    ]);
    let backend = HttpBackend::new(config(&endpoint)).unwrap();
    let auth = backend.complete("p").unwrap_err();
    assert!(matches!(auth, LlmError::Auth(_)));
    assert!(!auth.to_string().contains(KEY) && !format!("{auth:?}").contains(KEY));
    assert!(matches!(backend.complete("p").unwrap_err(), LlmError::Transient(_)));
    assert!(matches!(backend.complete("p").unwrap_err(), LlmError::Malformed(_)));
    assert!(matches!(backend.complete("p").unwrap_err(), LlmError::Malformed(_)));
    assert!(matches!(backend.complete("p").unwrap_err(), LlmError::Rejected { status: 400, .. }));
}

#[test]
fn rate_limit_is_retried_without_duplicates() {
    let mut limited = reply(429, "{}");
    limited.headers.push(("Retry-After".into(), "0".into()));
    let (endpoint, seen) = stub(vec![limited, reply(200, OK_BODY), reply(200, OK_BODY)]);
    let client = LlmClient::http(config(&endpoint)).unwrap();
    let ex = client.complete("p").unwrap();
    assert_eq!(ex.usage.unwrap().input_tokens, 812);
    // one failed attempt plus exactly one successful one
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn slow_provider_times_out() {
    let mut slow = reply(200, OK_BODY);
    slow.delay_ms = 2500;
    let (endpoint, _) = stub(vec![slow]);
    let mut cfg = config(&endpoint);
    cfg.request_timeout_s = 0.5;
    let err = HttpBackend::new(cfg).unwrap().complete("p").unwrap_err();
    assert!(matches!(err, LlmError::Timeout(_)), "{err:?}");
}
