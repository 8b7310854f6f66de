use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::pysrc::{is_keyword, tokenize, Tok, TokKind};

/// Local binding (alias or module root) to the dotted name it stands for.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportMap(BTreeMap<String, String>);

impl ImportMap {
    pub fn get(&self, local: &str) -> Option<&str> {
        self.0.get(local).map(String::as_str)
    }

    pub fn insert(&mut self, local: impl Into<String>, qualified: impl Into<String>) {
        self.0.insert(local.into(), qualified.into());
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Rewrites the root of a dotted chain through the map.
    pub fn resolve(&self, chain: &str) -> Option<String> {
        let (root, rest) = match chain.split_once('.') {
            Some((root, rest)) => (root, Some(rest)),
            None => (chain, None),
        };
        let base = self.get(root)?;
        Some(match rest {
            Some(rest) => format!("{base}.{rest}"),
            None => base.to_string(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiInvocation {
    /// The chain as written, e.g. `np.flipud`.
    pub raw_chain: String,
    /// Chain after alias resolution; equals `raw_chain` when unresolved.
    pub qualified_name: String,
    /// 1-based line of the first occurrence.
    pub source_line: usize,
    /// Whether the chain is rooted at an imported name.
    pub resolved: bool,
}

/// Extracts the import map and every call of a dotted name, in first-occurrence
/// order, deduplicated by qualified name.
pub fn extract_invocations(code: &str) -> (ImportMap, Vec<ApiInvocation>) {
    let toks = tokenize(code);
    let imports = harvest_imports(&toks);
    let mut invocations: Vec<ApiInvocation> = Vec::new();

    let mut i = 0;
    while i < toks.len() {
        let t = toks[i];
        let starts_chain = t.kind == TokKind::Name
            && !is_keyword(t.text)
            && !(i > 0 && toks[i - 1].kind == TokKind::Op && toks[i - 1].text == ".")
            && !(i > 0 && toks[i - 1].kind == TokKind::Name && matches!(toks[i - 1].text, "def" | "class"));
        if !starts_chain {
            i += 1;
            continue;
        }
        let mut parts = vec![t.text];
        let mut j = i + 1;
        while j + 1 < toks.len()
            && toks[j].kind == TokKind::Op
            && toks[j].text == "."
            && toks[j + 1].kind == TokKind::Name
        {
            parts.push(toks[j + 1].text);
            j += 2;
        }
        let is_call = toks.get(j).is_some_and(|n| n.kind == TokKind::Op && n.text == "(");
        if is_call && !in_import_statement(&toks, i) {
            let raw_chain = parts.join(".");
            let (qualified_name, resolved) = match imports.resolve(&raw_chain) {
                Some(q) => (q, true),
                None => (raw_chain.clone(), false),
            };
            if !invocations.iter().any(|inv| inv.qualified_name == qualified_name) {
                invocations.push(ApiInvocation { raw_chain, qualified_name, source_line: t.line, resolved });
            }
        }
        i = j.max(i + 1);
    }
    (imports, invocations)
}

fn in_import_statement(toks: &[Tok<'_>], idx: usize) -> bool {
    let start = toks[..idx]
        .iter()
        .rposition(|t| t.kind == TokKind::Newline || (t.kind == TokKind::Op && t.text == ";"))
        .map_or(0, |p| p + 1);
    toks.get(start)
        .is_some_and(|t| t.kind == TokKind::Name && matches!(t.text, "import" | "from"))
}

fn harvest_imports(toks: &[Tok<'_>]) -> ImportMap {
    let mut map = ImportMap::default();
    // Simple statements: split logical lines at `;` as well. An import may
    // also follow `if ...:` / `try:` on the same line.
    let mut stmt: Vec<Tok<'_>> = Vec::new();
    for &t in toks {
        let boundary = t.kind == TokKind::Newline || (t.kind == TokKind::Op && (t.text == ";" || (t.text == ":" && t.depth == 0)));
        if boundary {
            import_statement(&stmt, &mut map);
            stmt.clear();
        } else {
            stmt.push(t);
        }
    }
    import_statement(&stmt, &mut map);
    map
}

fn dotted(toks: &[Tok<'_>], mut i: usize) -> (String, usize) {
    let mut name = String::new();
    while i < toks.len() {
        let t = toks[i];
        if t.kind == TokKind::Name && !matches!(t.text, "as" | "import") {
            name.push_str(t.text);
            i += 1;
            if toks.get(i).is_some_and(|d| d.kind == TokKind::Op && d.text == ".") {
                name.push('.');
                i += 1;
                continue;
            }
        }
        break;
    }
    (name, i)
}

fn import_statement(stmt: &[Tok<'_>], map: &mut ImportMap) {
    let Some(first) = stmt.first() else { return };
    if first.kind != TokKind::Name {
        return;
    }
    match first.text {
        "import" => {
            // import a.b as c, d
            let mut i = 1;
            loop {
                let (module, next) = dotted(stmt, i);
                if module.is_empty() || module.ends_with('.') {
                    return;
                }
                i = next;
                if stmt.get(i).is_some_and(|t| t.text == "as") {
                    if let Some(alias) = stmt.get(i + 1).filter(|t| t.kind == TokKind::Name) {
                        map.insert(alias.text, module.clone());
                    }
                    i += 2;
                } else {
                    let root = module.split('.').next().unwrap_or_default();
                    map.insert(root, root);
                }
                if stmt.get(i).is_some_and(|t| t.text == ",") {
                    i += 1;
                } else {
                    return;
                }
            }
        }
        "from" => {
            // from a.b import (c as d, e)
            if stmt.get(1).is_some_and(|t| t.text == "." || t.text == "...") {
                return; // relative import
            }
            let (module, mut i) = dotted(stmt, 1);
            if module.is_empty() || module.ends_with('.') || !stmt.get(i).is_some_and(|t| t.text == "import") {
                return;
            }
            i += 1;
            while i < stmt.len() {
                let t = stmt[i];
                match (t.kind, t.text) {
                    (TokKind::Op, "(" | ")" | ",") => i += 1,
                    (TokKind::Name, name) => {
                        if stmt.get(i + 1).is_some_and(|t| t.text == "as") {
                            if let Some(alias) = stmt.get(i + 2).filter(|t| t.kind == TokKind::Name) {
                                map.insert(alias.text, format!("{module}.{name}"));
                            }
                            i += 3;
                        } else {
                            map.insert(name, format!("{module}.{name}"));
                            i += 1;
                        }
                    }
                    // `*` or anything unexpected
                    _ => return,
                }
            }
        }
        _ => {}
    }
}
