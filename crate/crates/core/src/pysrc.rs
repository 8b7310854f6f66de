//! Lexical helpers for Python snippets: a tokenizer that is tolerant of
//! malformed input, and a splitter for top-level statements.
//!
//! Nothing here parses Python fully; buggy snippets must still be readable.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokKind {
    Name,
    Number,
    Str,
    Op,
    /// End of a logical line (outside brackets, not after `\`).
    Newline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tok<'a> {
    pub kind: TokKind,
    pub text: &'a str,
    /// 1-based line of the first character.
    pub line: usize,
    /// Byte offsets into the source.
    pub start: usize,
    pub end: usize,
    /// Bracket nesting depth before this token.
    pub depth: usize,
}

pub const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del",
    "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal",
    "not", "or", "pass", "raise", "return", "try", "while", "with", "yield",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn is_name_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_name_char(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

/// Tokenizes `src`. Comments are dropped; unterminated strings run to the
/// end of input instead of failing.
pub fn tokenize(src: &str) -> Vec<Tok<'_>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut depth: usize = 0;
    let mut continued = false;

    let push_newline = |out: &mut Vec<Tok<'_>>, i: usize, line: usize| {
        if out.last().is_some_and(|t: &Tok<'_>| t.kind != TokKind::Newline) {
            out.push(Tok { kind: TokKind::Newline, text: "", line, start: i, end: i, depth: 0 });
        }
    };

    while i < src.len() {
        let c = src[i..].chars().next().expect("in bounds");
        match c {
            '\n' => {
                if depth == 0 && !continued {
                    push_newline(&mut out, i, line);
                }
                continued = false;
                line += 1;
                i += 1;
            }
            '\\' if bytes.get(i + 1) == Some(&b'\n') || src[i + 1..].starts_with("\r\n") => {
                continued = true;
                i += 1;
            }
            c if c.is_whitespace() => i += c.len_utf8(),
            '#' => {
                while i < src.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            _ => {
                let start = i;
                let start_line = line;
                let kind;
                if let Some(q) = string_start(&src[i..]) {
                    kind = TokKind::Str;
                    i += q.prefix_len;
                    let quote = q.quote;
                    let triple = q.triple;
                    i += if triple { 3 } else { 1 };
                    loop {
                        if i >= src.len() {
                            break;
                        }
                        let b = bytes[i];
                        if b == b'\\' {
                            if bytes.get(i + 1) == Some(&b'\n') {
                                line += 1;
                            }
                            i += 2;
                            continue;
                        }
                        if b == b'\n' {
                            line += 1;
                            if !triple {
                                // unterminated single-line string
                                break;
                            }
                        }
                        if b == quote {
                            if !triple {
                                i += 1;
                                break;
                            }
                            if bytes.get(i + 1) == Some(&quote) && bytes.get(i + 2) == Some(&quote) {
                                i += 3;
                                break;
                            }
                        }
                        i += 1;
                    }
                    i = i.min(src.len());
                } else if is_name_start(c) {
                    kind = TokKind::Name;
                    for ch in src[i..].chars() {
                        if !is_name_char(ch) {
                            break;
                        }
                        i += ch.len_utf8();
                    }
                } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
                    kind = TokKind::Number;
                    while i < src.len() {
                        let b = bytes[i];
                        let exponent_sign = (b == b'+' || b == b'-') && matches!(bytes[i - 1], b'e' | b'E');
                        if b.is_ascii_alphanumeric() || b == b'_' || b == b'.' || exponent_sign {
                            i += 1;
                        } else {
                            break;
                        }
                    }
                } else {
                    kind = TokKind::Op;
                    i += op_len(&src[i..]);
                }
                let text = &src[start..i];
                let tok_depth = depth;
                if kind == TokKind::Op {
                    match text {
                        "(" | "[" | "{" => depth += 1,
                        ")" | "]" | "}" => depth = depth.saturating_sub(1),
                        _ => {}
                    }
                }
                out.push(Tok { kind, text, line: start_line, start, end: i, depth: tok_depth });
            }
        }
    }
    push_newline(&mut out, src.len(), line);
    out
}

struct StringStart {
    prefix_len: usize,
    quote: u8,
    triple: bool,
}

fn string_start(s: &str) -> Option<StringStart> {
    let b = s.as_bytes();
    let mut p = 0;
    while p < 2 && p < b.len() && matches!(b[p].to_ascii_lowercase(), b'r' | b'b' | b'u' | b'f') {
        p += 1;
    }
    let quote = *b.get(p)?;
    if quote != b'\'' && quote != b'"' {
        return None;
    }
    let triple = b.get(p + 1) == Some(&quote) && b.get(p + 2) == Some(&quote);
    Some(StringStart { prefix_len: p, quote, triple })
}

fn op_len(s: &str) -> usize {
    const THREE: &[&str] = &["**=", "//=", ">>=", "<<=", "...", "!=="];
    const TWO: &[&str] = &[
        "==", "!=", "<=", ">=", "->", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", "**", "//", "<<", ">>",
        ":=",
    ];
    if THREE.iter().any(|op| s.starts_with(op)) {
        3
    } else if TWO.iter().any(|op| s.starts_with(op)) {
        2
    } else {
        s.chars().next().map_or(1, char::len_utf8)
    }
}

/// A top-level statement with its source text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statement {
    pub index: usize,
    /// 1-based first line.
    pub line: usize,
    pub text: String,
}

const CLAUSE_CONTINUATIONS: &[&str] = &["else", "elif", "except", "finally"];
const COMPOUND_HEADS: &[&str] = &["if", "for", "while", "with", "def", "class", "try", "async", "match"];

/// Splits a snippet into top-level statements, the unit the localizing
/// runner numbers. Indented blocks and `else`/`except` clauses stay with
/// their header; decorators stay with the decorated definition; simple
/// statements joined by `;` are separated.
pub fn top_level_statements(src: &str) -> Vec<Statement> {
    let toks = tokenize(src);
    let mut logical: Vec<&[Tok<'_>]> = Vec::new();
    let mut begin = 0;
    for (i, t) in toks.iter().enumerate() {
        if t.kind == TokKind::Newline {
            if i > begin {
                logical.push(&toks[begin..i]);
            }
            begin = i + 1;
        }
    }

    // (start byte, end byte, line)
    let mut spans: Vec<(usize, usize, usize)> = Vec::new();
    let mut pending_decorator = false;
    for line_toks in logical {
        let first = line_toks[0];
        let line_start = src[..first.start].rfind('\n').map_or(0, |p| p + 1);
        let indented = first.start > line_start;
        let last_end = line_toks[line_toks.len() - 1].end;
        let joins_previous = !spans.is_empty()
            && (indented
                || pending_decorator
                || (first.kind == TokKind::Name && CLAUSE_CONTINUATIONS.contains(&first.text)));
        if joins_previous {
            let last = spans.last_mut().expect("non-empty");
            last.1 = last_end;
        } else if first.kind == TokKind::Op
            || !(first.kind == TokKind::Name && COMPOUND_HEADS.contains(&first.text))
        {
            // Simple statement(s); split on top-level `;`.
            let mut seg_start = first.start;
            let mut seg_line = first.line;
            let mut after_semi = false;
            for t in line_toks {
                if after_semi {
                    seg_start = t.start;
                    seg_line = t.line;
                    after_semi = false;
                }
                if t.kind == TokKind::Op && t.text == ";" && t.depth == 0 && first.text != "@" {
                    if t.start > seg_start {
                        spans.push((seg_start, t.start, seg_line));
                    }
                    after_semi = true;
                }
            }
            if !after_semi {
                spans.push((seg_start, last_end, seg_line));
            }
        } else {
            spans.push((first.start, last_end, first.line));
        }
        pending_decorator = !indented && first.kind == TokKind::Op && first.text == "@"
            || (pending_decorator && indented);
    }

    spans
        .into_iter()
        .enumerate()
        .map(|(index, (start, end, line))| Statement { index, line, text: src[start..end].trim().to_string() })
        .collect()
}

/// Splits `text` at top-level occurrences of operator `op` (outside brackets and strings).
pub fn split_top_level<'a>(text: &'a str, op: &str) -> Vec<&'a str> {
    let mut parts = Vec::new();
    let mut start = 0;
    for t in tokenize(text) {
        if t.kind == TokKind::Op && t.depth == 0 && t.text == op {
            parts.push(&text[start..t.start]);
            start = t.end;
        }
    }
    parts.push(&text[start..]);
    parts
}
