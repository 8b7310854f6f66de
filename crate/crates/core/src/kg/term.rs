use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::KgError;

/// Prefix shared by every entity identifier in the graph.
pub const IRI_PREFIX: &str = "ds:";

/// Entity identifier of the form `ds:<segment>(.<segment>)*`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Iri(String);

impl Iri {
    pub fn new(value: impl Into<String>) -> Result<Self, KgError> {
        let value = value.into();
        let body = value
            .strip_prefix(IRI_PREFIX)
            .ok_or_else(|| KgError::InvalidIri(value.clone(), "missing `ds:` prefix"))?;
        if body.is_empty() {
            return Err(KgError::InvalidIri(value, "empty name"));
        }
        if value.chars().any(|c| c.is_whitespace() || c.is_control()) {
            return Err(KgError::InvalidIri(value, "contains whitespace"));
        }
        if body.split('.').any(str::is_empty) {
            return Err(KgError::InvalidIri(value, "empty segment"));
        }
        Ok(Self(value))
    }

    /// Builds `ds:<name>` from a qualified API or library name.
    pub fn entity(name: &str) -> Result<Self, KgError> {
        Self::new(format!("{IRI_PREFIX}{name}"))
    }

    /// `ds:<api>_parameter_<name>`. Grouped names as written in numpydoc
    /// (`x, y` or `d0, d1, ..., dn`) lose the space after each comma and the
    /// ellipsis becomes `…`; [`Iri::parameter_name`] reverses both.
    pub fn parameter(api: &str, param: &str) -> Result<Self, KgError> {
        Self::entity(&format!("{api}_parameter_{}", param.replace(", ", ",").replace("...", "…")))
    }

    /// The documented parameter name back from a parameter IRI of `api`.
    pub fn parameter_name(&self, api: &Iri) -> Option<String> {
        let prefix = format!("{}_parameter_", api.local_name());
        self.local_name().strip_prefix(&prefix).map(|n| n.replace('…', "...").replace(',', ", "))
    }

    /// `ds:<api>_return_<index>`
    pub fn return_value(api: &str, index: u32) -> Result<Self, KgError> {
        Self::entity(&format!("{api}_return_{index}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The identifier without its `ds:` prefix.
    pub fn local_name(&self) -> &str {
        &self.0[IRI_PREFIX.len()..]
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for Iri {
    type Error = KgError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<Iri> for String {
    fn from(iri: Iri) -> Self {
        iri.0
    }
}

/// The closed predicate vocabulary of the API ontology.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Predicate {
    #[serde(rename = "has_name")]
    HasName,
    #[serde(rename = "has_expression")]
    HasExpression,
    #[serde(rename = "has_explanation")]
    HasExplanation,
    #[serde(rename = "hasParameter")]
    HasParameter,
    #[serde(rename = "hasReturn")]
    HasReturn,
    #[serde(rename = "hasType")]
    HasType,
    #[serde(rename = "hasPosition")]
    HasPosition,
    #[serde(rename = "hasOptional")]
    HasOptional,
    #[serde(rename = "belongsToLibrary")]
    BelongsToLibrary,
    #[serde(rename = "belongsToModule")]
    BelongsToModule,
}

impl Predicate {
    pub const ALL: [Predicate; 10] = [
        Predicate::HasName,
        Predicate::HasExpression,
        Predicate::HasExplanation,
        Predicate::HasParameter,
        Predicate::HasReturn,
        Predicate::HasType,
        Predicate::HasPosition,
        Predicate::HasOptional,
        Predicate::BelongsToLibrary,
        Predicate::BelongsToModule,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Predicate::HasName => "has_name",
            Predicate::HasExpression => "has_expression",
            Predicate::HasExplanation => "has_explanation",
            Predicate::HasParameter => "hasParameter",
            Predicate::HasReturn => "hasReturn",
            Predicate::HasType => "hasType",
            Predicate::HasPosition => "hasPosition",
            Predicate::HasOptional => "hasOptional",
            Predicate::BelongsToLibrary => "belongsToLibrary",
            Predicate::BelongsToModule => "belongsToModule",
        }
    }

    /// Dependency relations link two entities; everything else is an attribute.
    pub fn is_dependency(self) -> bool {
        matches!(
            self,
            Predicate::HasParameter
                | Predicate::HasReturn
                | Predicate::BelongsToLibrary
                | Predicate::BelongsToModule
        )
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Predicate {
    type Err = KgError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Predicate::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| KgError::UnknownPredicate(s.to_string()))
    }
}

impl PartialOrd for Predicate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Lexicographic by name so that sorted triples agree with sorted dump lines.
impl Ord for Predicate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.as_str().cmp(other.as_str())
    }
}

/// Triple object: an entity or a plain literal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Term {
    Iri(Iri),
    Literal(String),
}

impl Term {
    pub fn literal(value: impl Into<String>) -> Self {
        Term::Literal(value.into())
    }

    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Term::Iri(iri) => Some(iri),
            Term::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&str> {
        match self {
            Term::Literal(s) => Some(s),
            Term::Iri(_) => None,
        }
    }

    /// Raw value: the IRI text or the unquoted literal.
    pub fn value(&self) -> &str {
        match self {
            Term::Iri(iri) => iri.as_str(),
            Term::Literal(s) => s,
        }
    }
}

impl From<Iri> for Term {
    fn from(iri: Iri) -> Self {
        Term::Iri(iri)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => f.write_str(iri.as_str()),
            Term::Literal(s) => write!(f, "\"{}\"", escape_literal(s)),
        }
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Ordered by rendered form, matching the bytewise order of dump lines.
impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Term::Iri(a), Term::Iri(b)) => a.cmp(b),
            (Term::Literal(a), Term::Literal(b)) => {
                // Compare with the closing quote included; `"a b"` sorts before `"a"` bytewise.
                let a = escape_literal(a);
                let b = escape_literal(b);
                a.bytes().chain(Some(b'"')).cmp(b.bytes().chain(Some(b'"')))
            }
            (Term::Literal(_), Term::Iri(_)) => Ordering::Less,
            (Term::Iri(_), Term::Literal(_)) => Ordering::Greater,
        }
    }
}

pub(crate) fn escape_literal(s: &str) -> std::borrow::Cow<'_, str> {
    if !s.contains(['"', '\\', '\n', '\r', '\t']) {
        return std::borrow::Cow::Borrowed(s);
    }
    let mut out = String::with_capacity(s.len() + 8);
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
    std::borrow::Cow::Owned(out)
}

/// A validated `(subject, predicate, object)` fact.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Predicate,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Iri, predicate: Predicate, object: impl Into<Term>) -> Result<Self, KgError> {
        let object = object.into();
        match (&object, predicate.is_dependency()) {
            (Term::Literal(_), true) => {
                return Err(KgError::Validation {
                    field: "object",
                    message: format!("predicate `{predicate}` requires an entity object, got a literal"),
                })
            }
            (Term::Iri(_), false) => {
                return Err(KgError::Validation {
                    field: "object",
                    message: format!("predicate `{predicate}` requires a literal object, got an entity"),
                })
            }
            (Term::Literal(s), false) if s.is_empty() && predicate != Predicate::HasExplanation => {
                return Err(KgError::Validation {
                    field: "object",
                    message: format!("predicate `{predicate}` requires a non-empty literal"),
                })
            }
            _ => {}
        }
        Ok(Self { subject, predicate, object })
    }

    /// Shorthand for attribute triples.
    pub fn attribute(subject: Iri, predicate: Predicate, value: impl Into<String>) -> Result<Self, KgError> {
        Self::new(subject, predicate, Term::Literal(value.into()))
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.predicate, self.object)
    }
}

/// One position of a pattern: either bound or a named variable (`?x`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Slot<T> {
    Bound(T),
    Var(String),
}

impl<T> Slot<T> {
    pub fn var(name: impl Into<String>) -> Self {
        Slot::Var(name.into().trim_start_matches('?').to_string())
    }

    pub fn var_name(&self) -> Option<&str> {
        match self {
            Slot::Var(name) => Some(name),
            Slot::Bound(_) => None,
        }
    }
}

impl<T: fmt::Display> fmt::Display for Slot<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Bound(v) => v.fmt(f),
            Slot::Var(name) => write!(f, "?{name}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub subject: Slot<Iri>,
    pub predicate: Slot<Predicate>,
    pub object: Slot<Term>,
}

impl TriplePattern {
    pub fn new(subject: Slot<Iri>, predicate: Slot<Predicate>, object: Slot<Term>) -> Self {
        Self { subject, predicate, object }
    }

    /// `(?s, ?p, ?o)`
    pub fn any() -> Self {
        Self::new(Slot::var("s"), Slot::var("p"), Slot::var("o"))
    }

    pub fn variables(&self) -> Vec<&str> {
        let mut vars = Vec::new();
        for name in [
            self.subject.var_name(),
            self.predicate.var_name(),
            self.object.var_name(),
        ]
        .into_iter()
        .flatten()
        {
            if !vars.contains(&name) {
                vars.push(name);
            }
        }
        vars
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.predicate, self.object)
    }
}
