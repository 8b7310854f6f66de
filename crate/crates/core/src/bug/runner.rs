use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::protocol::{RunMode, RunRequest, RunResponse};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunnerError {
    #[error("failed to start runner `{command}`: {message}")]
    Spawn { command: String, message: String },
    #[error("runner i/o: {0}")]
    Io(String),
    #[error("runner protocol violation: {0}")]
    Protocol(String),
    #[error("runner exited unexpectedly")]
    Crashed { stderr: String },
    #[error("runner did not answer within {0:.1}s")]
    Timeout(f64),
    #[error("no recorded runner response for {mode:?} request (code hash {code_hash})")]
    NotRecorded { mode: RunMode, code_hash: String },
    #[error("reading transcript: {0}")]
    Transcript(String),
}

/// Executes snippets on behalf of the repair pipeline. One request at a time.
pub trait Runner: Send {
    fn run(&mut self, request: &RunRequest) -> Result<RunResponse, RunnerError>;
}

impl<R: Runner + ?Sized> Runner for Box<R> {
    fn run(&mut self, request: &RunRequest) -> Result<RunResponse, RunnerError> {
        (**self).run(request)
    }
}

/// Seconds allowed beyond the request's own timeout before the child is killed.
const GRACE_S: f64 = 2.0;

/// Bytes of child stderr retained for crash reports.
const STDERR_KEEP: usize = 64 * 1024;

struct Live {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    stderr: Arc<Mutex<String>>,
    stderr_reader: Option<thread::JoinHandle<()>>,
}

/// A runner child process speaking the stdio protocol, started with `sh -c`.
/// It is restarted after a crash or a missed deadline.
pub struct ProcessRunner {
    command: String,
    live: Option<Live>,
    next_id: u64,
}

impl ProcessRunner {
    pub fn new(command: impl Into<String>) -> Self {
        Self { command: command.into(), live: None, next_id: 0 }
    }

    fn spawn(&self) -> Result<Live, RunnerError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| RunnerError::Spawn { command: self.command.clone(), message: e.to_string() })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let stderr_pipe = child.stderr.take().expect("piped stderr");
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        let stderr_reader = thread::spawn(move || {
            for line in BufReader::new(stderr_pipe).lines().map_while(Result::ok) {
                let mut buf = sink.lock().expect("stderr buffer");
                buf.push_str(&line);
                buf.push('\n');
                if buf.len() > STDERR_KEEP {
                    let cut = buf.len() - STDERR_KEEP;
                    let cut = (cut..buf.len()).find(|&i| buf.is_char_boundary(i)).unwrap_or(buf.len());
                    buf.drain(..cut);
                }
            }
        });
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Live { child, stdin, lines: rx, stderr, stderr_reader: Some(stderr_reader) })
    }

    fn kill(&mut self) -> String {
        let Some(mut live) = self.live.take() else { return String::new() };
        let _ = live.child.kill();
        let _ = live.child.wait();
        // A grandchild may still hold the pipe open, so never block on the reader.
        if let Some(reader) = live.stderr_reader.take() {
            for _ in 0..50 {
                if reader.is_finished() {
                    break;
                }
                thread::sleep(Duration::from_millis(10));
            }
        }
        let stderr = live.stderr.lock().expect("stderr buffer").clone();
        stderr
    }
}

impl Drop for ProcessRunner {
    fn drop(&mut self) {
        if let Some(mut live) = self.live.take() {
            // Closing stdin lets a well-behaved runner exit on its own.
            drop(live.stdin);
            if !matches!(live.child.try_wait(), Ok(Some(_))) {
                thread::sleep(Duration::from_millis(50));
                let _ = live.child.kill();
            }
            let _ = live.child.wait();
        }
    }
}

impl Runner for ProcessRunner {
    fn run(&mut self, request: &RunRequest) -> Result<RunResponse, RunnerError> {
        if self.live.is_none() {
            self.live = Some(self.spawn()?);
        }
        self.next_id += 1;
        let id = self.next_id.to_string();
        let mut req = request.clone();
        req.id = Some(id.clone());
        let mut line = serde_json::to_string(&req).map_err(|e| RunnerError::Protocol(e.to_string()))?;
        line.push('\n');

        let live = self.live.as_mut().expect("spawned");
        if let Err(e) = live.stdin.write_all(line.as_bytes()).and_then(|_| live.stdin.flush()) {
            let stderr = self.kill();
            return Err(if stderr.is_empty() { RunnerError::Io(e.to_string()) } else { RunnerError::Crashed { stderr } });
        }

        let deadline = Duration::from_secs_f64(request.timeout_s.max(0.0) + GRACE_S);
        let reply = live.lines.recv_timeout(deadline);
        match reply {
            Ok(Ok(text)) => {
                let resp: RunResponse = serde_json::from_str(&text)
                    .map_err(|e| RunnerError::Protocol(format!("unparsable response `{text}`: {e}")))?;
                if resp.id.as_deref().is_some_and(|got| got != id) {
                    return Err(RunnerError::Protocol(format!(
                        "response id {:?} does not match request id {id}",
                        resp.id
                    )));
                }
                Ok(resp)
            }
            Ok(Err(e)) => {
                let _ = self.kill();
                Err(RunnerError::Io(e.to_string()))
            }
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.kill();
                Err(RunnerError::Timeout(deadline.as_secs_f64()))
            }
            Err(RecvTimeoutError::Disconnected) => Err(RunnerError::Crashed { stderr: self.kill() }),
        }
    }
}

/// One request/response pair in a runner transcript file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunnerExchange {
    pub request: RunRequest,
    pub response: RunResponse,
}

/// Identity of a request for replay: everything except `id` and `timeout_s`.
fn replay_key(req: &RunRequest) -> (RunMode, String, String, String) {
    (req.mode, req.code.clone(), req.tests.clone(), req.imports.clone())
}

pub(crate) fn short_hash(text: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(&Sha256::digest(text.as_bytes())[..6])
}

/// Answers from a recorded transcript. Lookups do not consume entries, so
/// repeated identical requests (e.g. across repetitions) get the same answer.
#[derive(Clone, Debug, Default)]
pub struct ReplayRunner {
    responses: HashMap<(RunMode, String, String, String), RunResponse>,
}

impl ReplayRunner {
    pub fn new(exchanges: impl IntoIterator<Item = RunnerExchange>) -> Self {
        let mut responses = HashMap::new();
        for ex in exchanges {
            // first recording wins
            responses.entry(replay_key(&ex.request)).or_insert(ex.response);
        }
        Self { responses }
    }

    pub fn from_jsonl(text: &str) -> Result<Self, RunnerError> {
        let mut exchanges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ex: RunnerExchange =
                serde_json::from_str(line).map_err(|e| RunnerError::Transcript(format!("line {}: {e}", i + 1)))?;
            exchanges.push(ex);
        }
        Ok(Self::new(exchanges))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| RunnerError::Transcript(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_jsonl(&text)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Runner for ReplayRunner {
    fn run(&mut self, request: &RunRequest) -> Result<RunResponse, RunnerError> {
        let mut resp = self
            .responses
            .get(&replay_key(request))
            .cloned()
            .ok_or_else(|| RunnerError::NotRecorded { mode: request.mode, code_hash: short_hash(&request.code) })?;
        resp.id = request.id.clone();
        Ok(resp)
    }
}

/// Wraps a runner and keeps every exchange, for writing new transcripts.
pub struct RecordingRunner<R> {
    inner: R,
    pub exchanges: Vec<RunnerExchange>,
}

impl<R: Runner> RecordingRunner<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, exchanges: Vec::new() }
    }

    pub fn to_jsonl(&self) -> String {
        self.exchanges
            .iter()
            .map(|e| serde_json::to_string(e).expect("serializable") + "\n")
            .collect()
    }
}

impl<R: Runner> Runner for RecordingRunner<R> {
    fn run(&mut self, request: &RunRequest) -> Result<RunResponse, RunnerError> {
        let response = self.inner.run(request)?;
        self.exchanges.push(RunnerExchange { request: request.clone(), response: response.clone() });
        Ok(response)
    }
}
