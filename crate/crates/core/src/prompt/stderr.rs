//! Error-output cleaning: drop warnings, collapse library traceback frames,
//! and strip absolute paths down to file names.

/// Path fragments that mark a traceback frame as outside the user snippet.
const LIBRARY_MARKERS: &[&str] = &["site-packages", "dist-packages", "/lib/python", "\\lib\\", "<frozen "];

fn is_indented(line: &str) -> bool {
    line.starts_with(' ') || line.starts_with('\t')
}

/// `path:123:` style location prefix emitted by the warnings module.
fn strip_location(line: &str) -> &str {
    let mut rest = line;
    // Windows drive letters contain a colon of their own.
    let offset = if rest.len() > 2 && rest.as_bytes()[1] == b':' && rest.as_bytes()[0].is_ascii_alphabetic() { 2 } else { 0 };
    if let Some(colon) = rest[offset..].find(':').map(|c| c + offset) {
        let after = &rest[colon + 1..];
        let digits = after.bytes().take_while(u8::is_ascii_digit).count();
        if digits > 0 && after[digits..].starts_with(':') && !rest[..colon].contains(char::is_whitespace) {
            rest = after[digits + 1..].trim_start();
        }
    }
    rest
}

/// A line is a warning when its first token before `:` ends with `Warning`.
pub fn is_warning_line(line: &str) -> bool {
    if is_indented(line) {
        return false;
    }
    let body = strip_location(line);
    match body.split_once(':') {
        Some((head, _)) => head.split_whitespace().next().is_some_and(|t| t.ends_with("Warning")),
        None => false,
    }
}

fn remove_warnings(lines: Vec<&str>) -> Vec<&str> {
    let mut out = Vec::with_capacity(lines.len());
    let mut in_warning = false;
    for line in lines {
        if is_warning_line(line) {
            in_warning = true;
        } else if in_warning && is_indented(line) {
            // continuation of the warning (source echo)
        } else {
            in_warning = false;
            out.push(line);
        }
    }
    out
}

fn frame_file(line: &str) -> Option<&str> {
    let rest = line.trim_start().strip_prefix("File \"")?;
    rest.split_once('"').map(|(file, _)| file)
}

fn is_library_frame(file: &str) -> bool {
    LIBRARY_MARKERS.iter().any(|m| file.contains(m))
}

/// Replaces runs of library frames (header plus their indented source
/// lines) with a single marker line.
fn collapse_frames(lines: Vec<&str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(lines.len());
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        match frame_file(line) {
            Some(file) if is_library_frame(file) => {
                let indent = &line[..line.len() - line.trim_start().len()];
                let mut frames = 0;
                while i < lines.len() && frame_file(lines[i]).is_some_and(is_library_frame) {
                    let frame_indent = lines[i].len() - lines[i].trim_start().len();
                    frames += 1;
                    i += 1;
                    // source echo lines are indented deeper than the frame header
                    while i < lines.len()
                        && frame_file(lines[i]).is_none()
                        && lines[i].len() - lines[i].trim_start().len() > frame_indent
                    {
                        i += 1;
                    }
                }
                let noun = if frames == 1 { "frame" } else { "frames" };
                out.push(format!("{indent}[{frames} library {noun} omitted]"));
            }
            _ => {
                out.push(line.to_string());
                i += 1;
            }
        }
    }
    out
}

fn is_path_char(c: char) -> bool {
    !(c.is_whitespace() || matches!(c, '"' | '\'' | ':' | ',' | '(' | ')' | '[' | ']' | '<' | '>' | '`'))
}

fn opens_path(prev: Option<char>) -> bool {
    prev.is_none_or(|p| p.is_whitespace() || matches!(p, '"' | '\'' | '(' | '[' | '=' | ',' | '`' | '<'))
}

/// Replaces absolute paths (`/a/b/c.py`, `C:\a\c.py`) by their last component.
pub fn strip_paths(line: &str) -> String {
    let chars: Vec<char> = line.chars().collect();
    let mut out = String::with_capacity(line.len());
    let mut i = 0;
    while i < chars.len() {
        let prev = i.checked_sub(1).map(|p| chars[p]);
        let unix = chars[i] == '/' && chars.get(i + 1).is_some_and(|&c| c != '/' && is_path_char(c));
        let windows = chars[i].is_ascii_alphabetic()
            && chars.get(i + 1) == Some(&':')
            && chars.get(i + 2) == Some(&'\\');
        if (unix || windows) && opens_path(prev) {
            let start = if windows { i + 3 } else { i };
            let mut end = start;
            while end < chars.len() && is_path_char(chars[end]) {
                end += 1;
            }
            let path: String = chars[start..end].iter().collect();
            let trimmed = path.trim_end_matches(['/', '\\']);
            let base = trimmed.rsplit(['/', '\\']).next().unwrap_or_default();
            if !base.is_empty() {
                out.push_str(base);
                i = end;
                continue;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

/// Cleans raw error output for a prompt: removes warning blocks, collapses
/// traceback frames outside the user snippet, and strips absolute paths.
pub fn clean_stderr(raw: &str) -> String {
    let lines = remove_warnings(raw.lines().collect());
    let lines = collapse_frames(lines);
    let cleaned: Vec<String> = lines.iter().map(|l| strip_paths(l.trim_end())).collect();
    let start = cleaned.iter().position(|l| !l.trim().is_empty()).unwrap_or(cleaned.len());
    let end = cleaned.iter().rposition(|l| !l.trim().is_empty()).map_or(start, |e| e + 1);
    cleaned[start..end].join("\n")
}
