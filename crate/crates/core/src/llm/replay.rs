use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use super::{prompt_sha256, ChatBackend, ChatExchange, LlmError};

/// Plays back recorded exchanges. Each prompt has its own queue, consumed in
/// recording order; a prompt asked more often than recorded is an error.
#[derive(Debug, Default)]
pub struct ReplayBackend {
    queues: Mutex<HashMap<String, VecDeque<ChatExchange>>>,
}

impl ReplayBackend {
    pub fn new(exchanges: impl IntoIterator<Item = ChatExchange>) -> Self {
        let mut queues: HashMap<String, VecDeque<ChatExchange>> = HashMap::new();
        for ex in exchanges {
            queues.entry(prompt_sha256(&ex.prompt)).or_default().push_back(ex);
        }
        Self { queues: Mutex::new(queues) }
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LlmError> {
        let mut exchanges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ex: ChatExchange = serde_json::from_str(line)
                .map_err(|e| LlmError::Config(format!("transcript line {}: {e}", i + 1)))?;
            exchanges.push(ex);
        }
        Ok(Self::new(exchanges))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    /// Exchanges not yet played back.
    pub fn remaining(&self) -> usize {
        self.queues.lock().expect("replay lock").values().map(VecDeque::len).sum()
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, prompt: &str) -> Result<ChatExchange, LlmError> {
        let hash = prompt_sha256(prompt);
        self.queues
            .lock()
            .expect("replay lock")
            .get_mut(&hash)
            .and_then(VecDeque::pop_front)
            .ok_or(LlmError::Exhausted { prompt_hash: hash })
    }
}

/// Serializes exchanges as a replayable transcript.
pub fn exchanges_to_jsonl(exchanges: &[ChatExchange]) -> String {
    exchanges.iter().map(|e| serde_json::to_string(e).expect("serializable") + "\n").collect()
}
