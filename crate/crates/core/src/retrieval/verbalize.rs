use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::extract::ApiInvocation;
use crate::kg::{Iri, KnowledgeGraph, Predicate, SelectQuery, Slot, Term, TriplePattern};

/// How much retrieved API knowledge goes into the prompt.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RichnessLevel {
    #[default]
    ExpressionOnly,
    PlusExplanation,
    PlusParamsReturns,
    PlusBoth,
}

impl RichnessLevel {
    pub const ALL: [RichnessLevel; 4] = [
        RichnessLevel::ExpressionOnly,
        RichnessLevel::PlusExplanation,
        RichnessLevel::PlusParamsReturns,
        RichnessLevel::PlusBoth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RichnessLevel::ExpressionOnly => "expression_only",
            RichnessLevel::PlusExplanation => "plus_explanation",
            RichnessLevel::PlusParamsReturns => "plus_params_returns",
            RichnessLevel::PlusBoth => "plus_both",
        }
    }

    fn explanation(self) -> bool {
        matches!(self, RichnessLevel::PlusExplanation | RichnessLevel::PlusBoth)
    }

    fn params_returns(self) -> bool {
        matches!(self, RichnessLevel::PlusParamsReturns | RichnessLevel::PlusBoth)
    }
}

impl fmt::Display for RichnessLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RichnessLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RichnessLevel::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown richness level `{s}`"))
    }
}

/// Verbalized knowledge about one API.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeBlock {
    pub qualified_name: String,
    pub sentences: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Retrieved {
    Knowledge(KnowledgeBlock),
    Unresolved(String),
}

/// Knowledge for a set of invocations, in invocation order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiKnowledge {
    pub blocks: Vec<KnowledgeBlock>,
    pub unresolved: Vec<String>,
}

impl ApiKnowledge {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Prompt text: one sentence per line, blocks in order.
    pub fn render(&self) -> String {
        self.blocks
            .iter()
            .flat_map(|b| b.sentences.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

struct Param {
    name: String,
    position: u32,
    dtype: String,
    optional: bool,
    explanation: String,
}

struct Return {
    index: u32,
    dtype: String,
    explanation: String,
}

fn var(name: &str) -> Slot<Term> {
    Slot::var(name)
}

fn pattern(subject: Slot<Iri>, predicate: Predicate, object: Slot<Term>) -> TriplePattern {
    TriplePattern::new(subject, Slot::Bound(predicate), object)
}

fn literal_of(solution: &crate::kg::Solution, name: &str) -> String {
    solution.get(name).map(|t| t.value().to_string()).unwrap_or_default()
}

fn parameters(graph: &KnowledgeGraph, api: &Iri) -> Vec<Param> {
    let q = SelectQuery {
        variables: vec![],
        patterns: vec![
            pattern(Slot::Bound(api.clone()), Predicate::HasParameter, var("p")),
            pattern(Slot::var("p"), Predicate::HasType, var("t")),
            pattern(Slot::var("p"), Predicate::HasPosition, var("pos")),
            pattern(Slot::var("p"), Predicate::HasOptional, var("opt")),
            pattern(Slot::var("p"), Predicate::HasExplanation, var("x")),
        ],
    };
    let mut out: Vec<Param> = q
        .execute(graph)
        .iter()
        .filter_map(|s| {
            let entity = s.get("p")?.as_iri()?;
            Some(Param {
                name: entity.parameter_name(api).unwrap_or_else(|| entity.local_name().to_string()),
                position: literal_of(s, "pos").parse().unwrap_or(u32::MAX),
                dtype: literal_of(s, "t"),
                optional: literal_of(s, "opt") == "true",
                explanation: literal_of(s, "x"),
            })
        })
        .collect();
    out.sort_by(|a, b| (a.position, &a.name).cmp(&(b.position, &b.name)));
    out
}

fn returns(graph: &KnowledgeGraph, api: &Iri) -> Vec<Return> {
    let q = SelectQuery {
        variables: vec![],
        patterns: vec![
            pattern(Slot::Bound(api.clone()), Predicate::HasReturn, var("r")),
            pattern(Slot::var("r"), Predicate::HasType, var("t")),
            pattern(Slot::var("r"), Predicate::HasExplanation, var("x")),
        ],
    };
    let prefix = format!("{}_return_", api.local_name());
    let mut out: Vec<Return> = q
        .execute(graph)
        .iter()
        .filter_map(|s| {
            let entity = s.get("r")?.as_iri()?;
            Some(Return {
                index: entity.local_name().strip_prefix(&prefix)?.parse().ok()?,
                dtype: literal_of(s, "t"),
                explanation: literal_of(s, "x"),
            })
        })
        .collect();
    out.sort_by_key(|r| r.index);
    out
}

/// Looks up one API in the graph and verbalizes it at `level`.
pub fn retrieve(graph: &KnowledgeGraph, qualified_name: &str, level: RichnessLevel) -> Retrieved {
    let Ok(api) = Iri::entity(qualified_name) else {
        return Retrieved::Unresolved(qualified_name.to_string());
    };
    let expr_query = SelectQuery {
        variables: vec!["e".into()],
        patterns: vec![pattern(Slot::Bound(api.clone()), Predicate::HasExpression, var("e"))],
    };
    let Some(expression) = expr_query.execute(graph).first().map(|s| literal_of(s, "e")) else {
        return Retrieved::Unresolved(qualified_name.to_string());
    };

    let mut sentences = vec![format!("The full expression of API `{qualified_name}` is `{expression}`.")];

    if level.explanation() {
        let q = SelectQuery {
            variables: vec!["x".into()],
            patterns: vec![pattern(Slot::Bound(api.clone()), Predicate::HasExplanation, var("x"))],
        };
        if let Some(x) = q.execute(graph).first().map(|s| literal_of(s, "x")) {
            if !x.trim().is_empty() {
                sentences.push(format!("The explanation of API `{qualified_name}` is: {}", x.trim()));
            }
        }
    }

    if level.params_returns() {
        for p in parameters(graph, &api) {
            let requirement = if p.optional { "optional" } else { "required" };
            let mut s = format!(
                "Parameter `{}` of API `{qualified_name}` is at position {}, has type `{}`, and is {requirement}.",
                p.name, p.position, p.dtype
            );
            if !p.explanation.trim().is_empty() {
                s.push_str(&format!(" Its explanation is: {}", p.explanation.trim()));
            }
            sentences.push(s);
        }
        for r in returns(graph, &api) {
            let mut s = format!("Return value {} of API `{qualified_name}` has type `{}`.", r.index, r.dtype);
            if !r.explanation.trim().is_empty() {
                s.push_str(&format!(" Its explanation is: {}", r.explanation.trim()));
            }
            sentences.push(s);
        }
    }

    Retrieved::Knowledge(KnowledgeBlock { qualified_name: qualified_name.to_string(), sentences })
}

/// Which invocations feed the API knowledge section.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalScope {
    /// Every invocation, in source order.
    All,
    /// Every invocation, with those in the failing statement moved first.
    #[default]
    FailingFirst,
    /// Only invocations that occur in the failing statement.
    FailingOnly,
}

impl FromStr for RetrievalScope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(RetrievalScope::All),
            "failing_first" => Ok(RetrievalScope::FailingFirst),
            "failing_only" => Ok(RetrievalScope::FailingOnly),
            other => Err(format!("unknown retrieval scope `{other}`")),
        }
    }
}

/// Orders (or filters) invocations by whether their chain appears in the
/// failing statement. Without a failing statement, source order is kept.
pub fn order_by_failure(
    invocations: &[ApiInvocation],
    failing_source: Option<&str>,
    scope: RetrievalScope,
) -> Vec<ApiInvocation> {
    let Some(failing) = failing_source.filter(|s| !s.trim().is_empty()) else {
        return invocations.to_vec();
    };
    let (hit, miss): (Vec<_>, Vec<_>) = invocations
        .iter()
        .cloned()
        .partition(|inv| failing.contains(&format!("{}(", inv.raw_chain)) || failing.contains(&inv.raw_chain));
    match scope {
        RetrievalScope::All => invocations.to_vec(),
        RetrievalScope::FailingFirst => hit.into_iter().chain(miss).collect(),
        RetrievalScope::FailingOnly => hit,
    }
}

/// Retrieves every invocation in order; unknown APIs are listed as unresolved.
pub fn retrieve_all(graph: &KnowledgeGraph, invocations: &[ApiInvocation], level: RichnessLevel) -> ApiKnowledge {
    let mut out = ApiKnowledge::default();
    for inv in invocations {
        match retrieve(graph, &inv.qualified_name, level) {
            Retrieved::Knowledge(block) => out.blocks.push(block),
            Retrieved::Unresolved(name) => out.unresolved.push(name),
        }
    }
    out
}
