//! Oracles and generators shared by the integration tests. Everything here is
//! written independently of the library code it checks.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use dsrepair::bug::{ReplayRunner, Runner};
use dsrepair::eval::{evaluate, parse_corpus, Evaluation, KnowledgeSource, RepairSettings, TaskRecord};
use dsrepair::ingest::{ingest_str, ApiRecord, ParamRecord, ReturnRecord};
use dsrepair::llm::{known_cost_model, prompt_sha256, LlmClient, MockBackend};
use dsrepair::prompt::PromptMode;
use dsrepair::kg::{Iri, KnowledgeGraph, Predicate, Slot, Term, Triple, TriplePattern};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::Deserialize;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

// ---- brute-force query oracle ----

pub type Row = BTreeMap<String, Term>;

/// Projected bindings plus the triples that produced them.
pub type Answer = (Vec<(String, Term)>, Vec<Triple>);

fn bind_var(row: &mut Row, name: &str, value: Term) -> bool {
    match row.get(name) {
        Some(v) => *v == value,
        None => {
            row.insert(name.to_string(), value);
            true
        }
    }
}

/// Matches one pattern against one triple, extending `row`. A variable in
/// predicate position binds to the predicate name as a literal.
pub fn match_one(pattern: &TriplePattern, t: &Triple, row: &Row) -> Option<Row> {
    let mut row = row.clone();
    let ok = match &pattern.subject {
        Slot::Bound(s) => *s == t.subject,
        Slot::Var(v) => bind_var(&mut row, v, Term::Iri(t.subject.clone())),
    } && match &pattern.predicate {
        Slot::Bound(p) => *p == t.predicate,
        Slot::Var(v) => bind_var(&mut row, v, Term::Literal(t.predicate.as_str().to_string())),
    } && match &pattern.object {
        Slot::Bound(o) => *o == t.object,
        Slot::Var(v) => bind_var(&mut row, v, t.object.clone()),
    };
    ok.then_some(row)
}

/// Nested-loop join over every triple for every pattern.
pub fn brute_join(patterns: &[TriplePattern], triples: &[Triple]) -> Vec<(Row, Vec<Triple>)> {
    let mut rows: Vec<(Row, Vec<Triple>)> = vec![(Row::new(), Vec::new())];
    for p in patterns {
        let mut next = Vec::new();
        for (row, used) in &rows {
            for t in triples {
                if let Some(r) = match_one(p, t, row) {
                    let mut u = used.clone();
                    u.push(t.clone());
                    next.push((r, u));
                }
            }
        }
        rows = next;
    }
    rows
}

// ---- random stores ----

pub const SUBJECTS: usize = 40;

pub fn subject(i: usize) -> Iri {
    Iri::entity(&format!("lib.mod.f{i}")).unwrap()
}

/// A random valid triple over a small universe so that joins hit.
pub fn random_triple(rng: &mut StdRng) -> Triple {
    let s = subject(rng.gen_range(0..SUBJECTS));
    let p = *Predicate::ALL.choose(rng).unwrap();
    let o = if p.is_dependency() {
        Term::Iri(subject(rng.gen_range(0..SUBJECTS)))
    } else {
        Term::literal(format!("v{}", rng.gen_range(0..12)))
    };
    Triple::new(s, p, o).unwrap()
}

/// A pattern shaped after `template` (usually a stored triple, so the
/// pattern has answers): each position is kept bound or becomes a variable.
/// Variables are mostly fresh per position (`s1`, `p1`, ...); now and then
/// one is drawn from `shared`, which forces equal values across positions.
pub fn pattern_from(rng: &mut StdRng, template: &Triple, tag: usize, shared: &[&str]) -> TriplePattern {
    let var = |rng: &mut StdRng, pos: &str| {
        if rng.gen_bool(0.15) {
            shared.choose(rng).unwrap().to_string()
        } else {
            format!("{pos}{tag}")
        }
    };
    let subject = if rng.gen_bool(0.4) { Slot::Bound(template.subject.clone()) } else { Slot::Var(var(rng, "s")) };
    let predicate = if rng.gen_bool(0.7) { Slot::Bound(template.predicate) } else { Slot::Var(var(rng, "p")) };
    let object = if rng.gen_bool(0.4) { Slot::Bound(template.object.clone()) } else { Slot::Var(var(rng, "o")) };
    TriplePattern::new(subject, predicate, object)
}

// ---- synthetic documentation records ----

const WORDS: &[&str] = &[
    "array", "axis", "Return", "the", "input", "along", "shape", "\"quoted\"", "back\\slash", "naïve", "→", "tab\there",
    "x, y", "-1", "None", "ümlaut", "{braces}", "<tag>",
];

fn sentence(rng: &mut StdRng, max: usize) -> String {
    let n = rng.gen_range(0..=max);
    let mut s: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
    if rng.gen_bool(0.2) {
        s.push("\nsecond line");
    }
    s.join(" ")
}

/// A valid record for `<lib>.<module>.f<i>` with tricky literal text.
pub fn synthetic_record(rng: &mut StdRng, i: usize) -> ApiRecord {
    let lib = ["numpy", "pandas", "scipy"][i % 3];
    let module = format!("{lib}.m{}", i % 5);
    let name = format!("{module}.f{i}");
    let n_params = rng.gen_range(0..5);
    let parameters: Vec<ParamRecord> = (0..n_params)
        .map(|k| ParamRecord {
            name: if k == 1 && rng.gen_bool(0.3) { "x, y".to_string() } else { format!("p{k}") },
            position: k as u32,
            dtype: ["int", "array_like", "str or None", "dict[str, Any]"][rng.gen_range(0..4)].to_string(),
            explanation: sentence(rng, 6),
            optional: rng.gen_bool(0.5),
        })
        .collect();
    let args: Vec<&str> = parameters.iter().map(|p| p.name.as_str()).collect();
    let returns = (0..rng.gen_range(0..3))
        .map(|k| ReturnRecord { index: k, dtype: "ndarray".into(), explanation: sentence(rng, 4) })
        .collect();
    ApiRecord {
        qualified_name: name.clone(),
        expression: format!("{name}({})", args.join(", ")),
        explanation: sentence(rng, 12),
        library: lib.to_string(),
        module,
        url: String::new(),
        parameters,
        returns,
        version: None,
    }
}

pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<ApiRecord> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|i| synthetic_record(&mut rng, i)).collect()
}

pub fn to_jsonl(records: &[ApiRecord]) -> String {
    records.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect()
}

// ---- extraction fixtures ----

#[derive(Debug, Deserialize)]
pub struct Snippet {
    pub name: String,
    pub code: String,
    /// Qualified names in first-occurrence order.
    pub expected: Vec<String>,
    /// The subset of `expected` not rooted at an import.
    pub unresolved: Vec<String>,
}

pub fn snippets() -> Vec<Snippet> {
    read_fixture("extraction_snippets.jsonl")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// The code of the localization figure: two calls on one line.
pub const FLIPUD_SNIPPET: &str = "import numpy as np\n\
a = [[1, 2], [3, 4], [5, 6], [7, 8]]\n\
result = np.flipud(np.array_split(a, 3))\n";

pub const MINORTICKS_SNIPPET: &str = "import matplotlib.pyplot as plt\nplt.minorticks_on(axis='x')\n";

// ---- query cases ----

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Query text for `patterns` with `SELECT *`, written without the library's printer.
pub fn query_text(patterns: &[TriplePattern]) -> String {
    let slot = |iri: Option<String>, var: Option<&str>| match (iri, var) {
        (Some(v), _) => v,
        (None, Some(v)) => format!("?{v}"),
        (None, None) => unreachable!(),
    };
    let body: Vec<String> = patterns
        .iter()
        .map(|p| {
            let s = match &p.subject {
                Slot::Bound(i) => slot(Some(i.as_str().to_string()), None),
                Slot::Var(v) => slot(None, Some(v)),
            };
            let pr = match &p.predicate {
                Slot::Bound(x) => x.as_str().to_string(),
                Slot::Var(v) => format!("?{v}"),
            };
            let o = match &p.object {
                Slot::Bound(Term::Iri(i)) => i.as_str().to_string(),
                Slot::Bound(Term::Literal(l)) => quote(l),
                Slot::Var(v) => format!("?{v}"),
            };
            format!("{s} {pr} {o}")
        })
        .collect();
    format!("SELECT * WHERE {{\n  {}\n}}", body.join(" .\n  "))
}

/// Variables of `patterns` in first-appearance order.
pub fn first_appearance(patterns: &[TriplePattern]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for p in patterns {
        let names = [p.subject.var_name(), p.predicate.var_name(), p.object.var_name()];
        for n in names.into_iter().flatten() {
            if !out.iter().any(|x| x == n) {
                out.push(n.to_string());
            }
        }
    }
    out
}

/// One randomized store plus a one- or two-pattern query, checked against
/// the nested-loop oracle. Returns the number of rows compared.
pub fn check_query_case(seed: u64, max_triples: usize) -> Result<usize, String> {
    use dsrepair::kg::parse_select;

    let mut rng = StdRng::seed_from_u64(seed);
    // log-uniform size so small and large stores both show up
    let size = (10f64.powf(rng.gen_range(0.0..(max_triples as f64).log10()))) as usize;
    let mut triples: Vec<Triple> = (0..size).map(|_| random_triple(&mut rng)).collect();
    let mut g = KnowledgeGraph::new();
    g.extend(triples.iter().cloned()).map_err(|e| e.to_string())?;
    triples.sort();
    triples.dedup();
    if g.len() != triples.len() {
        return Err(format!("store holds {} triples, expected {}", g.len(), triples.len()));
    }

    let vars = ["x", "y"];
    // mostly shaped after stored triples; sometimes after arbitrary ones, which may miss
    let template = |rng: &mut StdRng| match triples.choose(rng) {
        Some(t) if rng.gen_bool(0.85) => t.clone(),
        _ => random_triple(rng),
    };
    let first = template(&mut rng);
    let mut patterns = vec![pattern_from(&mut rng, &first, 1, &vars)];
    if rng.gen_bool(0.6) {
        // keep the nested loop affordable on large stores
        if triples.len() > 2000 {
            patterns[0].subject = Slot::Bound(first.subject.clone());
        }
        // share a variable most of the time so the join is not a plain product:
        // a star on the subject or a chain through an entity object
        let star = patterns[0].subject.var_name().map(|v| (v.to_string(), Term::Iri(first.subject.clone())));
        let chain = patterns[0].object.var_name().map(|v| (v.to_string(), first.object.clone()));
        let shared = if rng.gen_bool(0.8) { star.or(chain) } else { None };
        let second = match shared {
            Some((v, Term::Iri(at))) => {
                let linked: Vec<&Triple> = triples.iter().filter(|t| t.subject == at).collect();
                let next = linked.choose(&mut rng).map(|t| (*t).clone()).unwrap_or_else(|| template(&mut rng));
                let mut p = pattern_from(&mut rng, &next, 2, &vars);
                p.subject = Slot::Var(v);
                p
            }
            _ => {
                let next = template(&mut rng);
                pattern_from(&mut rng, &next, 2, &vars)
            }
        };
        patterns.push(second);
    }

    let expected_rows = brute_join(&patterns, &triples);
    let projection = first_appearance(&patterns);
    let mut expected: Vec<Answer> = expected_rows
        .into_iter()
        .map(|(row, used)| (projection.iter().map(|v| (v.clone(), row[v].clone())).collect(), used))
        .collect();
    expected.sort();

    let text = query_text(&patterns);
    let q = parse_select(&text).map_err(|e| format!("{text}: {e}"))?;
    if q.patterns != patterns {
        return Err(format!("parsed patterns differ for {text}"));
    }
    let mut got: Vec<Answer> =
        q.execute(&g).into_iter().map(|s| (s.bindings, s.triples)).collect();
    got.sort();
    if got != expected {
        return Err(format!("{text}\nstore of {} triples: got {} rows, oracle {}", triples.len(), got.len(), expected.len()));
    }

    if patterns.len() == 1 {
        let mut single: Vec<(Row, Triple)> = g.query(&patterns[0]).into_iter().map(|m| (m.bindings, m.triple)).collect();
        single.sort();
        let mut want: Vec<(Row, Triple)> = triples
            .iter()
            .filter_map(|t| match_one(&patterns[0], t, &Row::new()).map(|r| (r, t.clone())))
            .collect();
        want.sort();
        if single != want {
            return Err(format!("single-pattern query differs for {text}"));
        }
    }
    Ok(expected.len())
}

// ---- round trip ----

/// Ingest, save, load, save again; then recover every record by query.
pub fn check_round_trip(records: &[ApiRecord]) -> Result<(), String> {
    use dsrepair::ingest::ingest_str;
    use dsrepair::kg::{load_dump, parse_select, save_dump};

    let (g, report) = ingest_str(&to_jsonl(records));
    if !report.is_clean() {
        return Err(report.to_string());
    }
    let first = save_dump(&g);
    let loaded = load_dump(&first).map_err(|e| e.to_string())?;
    let second = save_dump(&loaded);
    if first != second {
        return Err("re-saved dump differs".into());
    }
    if loaded != g {
        return Err("loaded graph differs".into());
    }

    let one = |q: &str, var: &str| -> Result<Vec<String>, String> {
        let q = parse_select(q).map_err(|e| format!("{q}: {e}"))?;
        Ok(q.execute(&loaded).iter().map(|s| s.get(var).unwrap().value().to_string()).collect())
    };
    for r in records {
        let api = format!("ds:{}", r.qualified_name);
        let expr = one(&format!("SELECT ?e WHERE {{ {api} has_expression ?e }}"), "e")?;
        if expr != [r.expression.clone()] {
            return Err(format!("{}: expression {expr:?}", r.qualified_name));
        }
        let expl = one(&format!("SELECT ?x WHERE {{ {api} has_explanation ?x }}"), "x")?;
        if expl != [r.explanation.clone()] {
            return Err(format!("{}: explanation {expl:?}", r.qualified_name));
        }
        let q = format!("SELECT ?p ?t WHERE {{ {api} hasParameter ?p . ?p hasType ?t }}");
        let parsed = parse_select(&q).map_err(|e| e.to_string())?;
        let api_iri = Iri::entity(&r.qualified_name).unwrap();
        let mut got: Vec<(String, String)> = parsed
            .execute(&loaded)
            .iter()
            .map(|s| {
                let p = s.get("p").unwrap().as_iri().unwrap();
                (p.parameter_name(&api_iri).unwrap_or_default(), s.get("t").unwrap().value().to_string())
            })
            .collect();
        got.sort();
        let mut want: Vec<(String, String)> = r.parameters.iter().map(|p| (p.name.clone(), p.dtype.clone())).collect();
        want.sort();
        if got != want {
            return Err(format!("{}: parameters {got:?} vs {want:?}", r.qualified_name));
        }
    }
    Ok(())
}

/// Tasks fixed by exactly each nonempty group of modes, by enumerating every subset.
pub fn power_set_oracle(sets: &BTreeMap<String, BTreeSet<String>>, corpus: &BTreeSet<String>) -> BTreeMap<Vec<String>, usize> {
    let modes: Vec<&String> = sets.keys().collect();
    let mut out = BTreeMap::new();
    for mask in 1u32..(1 << modes.len()) {
        let group: Vec<String> = (0..modes.len()).filter(|i| mask & (1 << i) != 0).map(|i| modes[i].clone()).collect();
        let n = corpus
            .iter()
            .filter(|t| (0..modes.len()).all(|i| sets[modes[i]].contains(*t) == (mask & (1 << i) != 0)))
            .count();
        if n > 0 {
            out.insert(group, n);
        }
    }
    out
}

// ---- prompt layout oracles ----

pub const PD: &str = "Problem Description";
pub const IC: &str = "Incorrect Code";
pub const EM: &str = "Error Message";
pub const API: &str = "API Knowledge";
pub const BUG: &str = "Bug Knowledge";
pub const FC: &str = "Fact Checking";
pub const RF: &str = "Response Format";

/// Expected section headers of the first prompt of each mode.
pub fn layout(mode: PromptMode) -> Vec<&'static str> {
    match mode {
        PromptMode::Dsrepair => vec![PD, IC, EM, API, BUG, FC, RF],
        PromptMode::DsrepairWoApi => vec![PD, IC, EM, BUG, FC, RF],
        PromptMode::DsrepairWoBug => vec![PD, IC, EM, API, FC, RF],
        PromptMode::DsrepairWoApiBug => vec![PD, IC, EM, FC, RF],
        PromptMode::SelfDebuggingS => vec![PD, IC, "Feedback", RF],
        PromptMode::SelfDebuggingE => vec![PD, IC, "Explanation Request"],
        PromptMode::ChatRepair => vec![PD, IC, "Execution Result", RF],
        PromptMode::SelfRepair => vec![PD, IC, "Execution Result", "Explanation Request"],
    }
}

pub fn dropped(mode: PromptMode) -> Vec<&'static str> {
    match mode {
        PromptMode::DsrepairWoApi => vec![API],
        PromptMode::DsrepairWoBug => vec![BUG],
        PromptMode::DsrepairWoApiBug => vec![API, BUG],
        _ => vec![],
    }
}

/// Splits a rendered prompt on its `## ` header lines.
pub fn sections(rendered: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, Vec<&str>)> = Vec::new();
    for line in rendered.lines() {
        match line.strip_prefix("## ") {
            Some(h) => out.push((h.to_string(), Vec::new())),
            None => out.last_mut().expect("prompt starts with a header").1.push(line),
        }
    }
    out.into_iter().map(|(h, body)| (h, body.join("\n").trim_end().to_string())).collect()
}

pub fn task_corpus() -> Vec<TaskRecord> {
    parse_corpus(&read_fixture("e2e/tasks.jsonl")).0
}

pub fn fixture_kg() -> KnowledgeGraph {
    ingest_str(&read_fixture("api_docs.jsonl")).0
}

pub fn run_mode(mode: PromptMode, tasks: &[TaskRecord], g: &KnowledgeGraph) -> Evaluation {
    let client = LlmClient::new(Box::new(MockBackend::load(fixture("e2e/mock_rules.json")).unwrap()));
    evaluate(
        tasks,
        &RepairSettings::new(mode),
        1,
        1,
        KnowledgeSource::Graph(g),
        &|| Ok(Box::new(ReplayRunner::from_jsonl(&read_fixture("e2e/runner_transcript.jsonl"))?) as Box<dyn Runner>),
        &client,
        &known_cost_model("gpt-3.5-turbo").unwrap(),
        None,
    )
    .unwrap()
}

/// Prompts sent per task, in order.
pub fn prompts_by_task(e: &Evaluation) -> BTreeMap<String, Vec<String>> {
    let by_hash: BTreeMap<String, &str> = e.exchanges.iter().map(|x| (prompt_sha256(&x.prompt), x.prompt.as_str())).collect();
    e.outcomes
        .iter()
        .map(|o| (o.task_id.clone(), o.exchanges.iter().map(|r| by_hash[&r.prompt_sha256].to_string()).collect()))
        .collect()
}

/// An independent check: no token that starts like an absolute path and no
/// line whose leading word is a `...Warning:` category.
pub fn assert_no_paths_or_warnings(text: &str) -> Result<(), String> {
    for line in text.lines() {
        for token in line.split(|c: char| c.is_whitespace() || c == '"' || c == '\'' || c == '(') {
            let b = token.as_bytes();
            let unix = token.starts_with('/') && token.len() > 1 && token[1..].contains('/');
            let windows = b.len() > 2 && b[0].is_ascii_alphabetic() && b[1] == b':' && b[2] == b'\\';
            if unix || windows {
                return Err(format!("absolute path `{token}`"));
            }
        }
        let head = line.split(':').find(|part| {
            let p = part.trim();
            !p.is_empty() && !p.chars().all(|c| c.is_ascii_digit()) && !p.contains(['/', '\\'])
        });
        if !line.starts_with([' ', '\t']) {
            if let Some(w) = head.and_then(|h| h.split_whitespace().next()) {
                if w.ends_with("Warning") {
                    return Err(format!("warning line `{line}`"));
                }
            }
        }
    }
    Ok(())
}
