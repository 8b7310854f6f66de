//! Plain-text retrieval baseline: fixed-size token windows around API names
//! in raw documentation text.

use std::path::Path;

/// Tokens per retrieved window.
pub const WINDOW_TOKENS: usize = 50;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PlainTextCorpus {
    /// `(document name, text)`, in load order.
    pub documents: Vec<(String, String)>,
}

impl PlainTextCorpus {
    pub fn new(documents: Vec<(String, String)>) -> Self {
        Self { documents }
    }

    /// Loads every regular file in `dir` (non-recursive), sorted by file name.
    pub fn load_dir(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let mut entries: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(Result::ok)
            .filter(|e| e.file_type().is_ok_and(|t| t.is_file()))
            .map(|e| e.path())
            .collect();
        entries.sort();
        let mut documents = Vec::with_capacity(entries.len());
        for path in entries {
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            documents.push((name, std::fs::read_to_string(&path)?));
        }
        Ok(Self { documents })
    }
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// True when `keyword` occurs in `token` not glued to a longer dotted name.
fn token_mentions(token: &str, keyword: &str) -> bool {
    let bytes = token.as_bytes();
    token.match_indices(keyword).any(|(at, _)| {
        let before_ok = at == 0 || !(is_ident_byte(bytes[at - 1]) || bytes[at - 1] == b'.');
        let end = at + keyword.len();
        let after_ok = end == bytes.len() || !is_ident_byte(bytes[end]);
        before_ok && after_ok
    })
}

/// A window of `WINDOW_TOKENS` whitespace tokens centred on the first mention
/// of `keyword` in each document. Near a document edge the window shifts
/// inward; documents shorter than the window are returned whole.
pub fn retrieve_plain_text(corpus: &PlainTextCorpus, keyword: &str) -> Vec<String> {
    if keyword.is_empty() {
        return Vec::new();
    }
    corpus
        .documents
        .iter()
        .filter_map(|(_, text)| {
            let tokens: Vec<&str> = text.split_whitespace().collect();
            let pos = tokens.iter().position(|t| token_mentions(t, keyword))?;
            let width = WINDOW_TOKENS.min(tokens.len());
            let start = pos.saturating_sub(WINDOW_TOKENS / 2).min(tokens.len() - width);
            Some(tokens[start..start + width].join(" "))
        })
        .collect()
}
