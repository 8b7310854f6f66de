use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::term::{Iri, Predicate, Slot, Term, Triple, TriplePattern};
use super::KgError;

/// Variable name (without `?`) to bound value.
pub type Bindings = BTreeMap<String, Term>;

/// One match of a single pattern against the store.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternMatch {
    pub bindings: Bindings,
    pub triple: Triple,
}

/// In-memory triple store with subject, predicate and object indexes.
#[derive(Clone, Debug, Default)]
pub struct KnowledgeGraph {
    triples: BTreeSet<Triple>,
    by_subject: HashMap<Iri, BTreeSet<Triple>>,
    by_predicate: HashMap<Predicate, BTreeSet<Triple>>,
    by_object: HashMap<Term, BTreeSet<Triple>>,
    meta: BTreeMap<String, String>,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.triples == other.triples && self.meta == other.meta
    }
}

impl Eq for KnowledgeGraph {}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a triple; returns `false` when it was already present.
    pub fn insert(&mut self, triple: Triple) -> Result<bool, KgError> {
        // Re-check the object class: fields are public and may have been edited.
        let triple = Triple::new(triple.subject, triple.predicate, triple.object)?;
        if self.triples.contains(&triple) {
            return Ok(false);
        }
        self.by_subject
            .entry(triple.subject.clone())
            .or_default()
            .insert(triple.clone());
        self.by_predicate
            .entry(triple.predicate)
            .or_default()
            .insert(triple.clone());
        self.by_object
            .entry(triple.object.clone())
            .or_default()
            .insert(triple.clone());
        self.triples.insert(triple);
        Ok(true)
    }

    pub fn extend<I: IntoIterator<Item = Triple>>(&mut self, triples: I) -> Result<usize, KgError> {
        let mut added = 0;
        for t in triples {
            added += usize::from(self.insert(t)?);
        }
        Ok(added)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    /// All triples in canonical `(subject, predicate, object)` order.
    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn set_library_version(&mut self, library: impl Into<String>, version: impl Into<String>) {
        self.meta.insert(library.into(), version.into());
    }

    pub fn library_version(&self, library: &str) -> Option<&str> {
        self.meta.get(library).map(String::as_str)
    }

    /// Library name to version text.
    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    /// Matches one pattern. Results are in canonical triple order.
    pub fn query(&self, pattern: &TriplePattern) -> Vec<PatternMatch> {
        self.candidates(pattern)
            .filter_map(|t| unify(pattern, t, &Bindings::new()).map(|bindings| PatternMatch {
                bindings,
                triple: t.clone(),
            }))
            .collect()
    }

    /// Smallest indexed candidate set for the bound positions of `pattern`.
    pub(crate) fn candidates<'a>(&'a self, pattern: &TriplePattern) -> Box<dyn Iterator<Item = &'a Triple> + 'a> {
        let mut best: Option<Box<dyn Iterator<Item = &'a Triple> + 'a>> = None;
        let mut best_len = usize::MAX;

        if let Slot::Bound(subject) = &pattern.subject {
            let set = self.by_subject.get(subject);
            let n = set.map_or(0, BTreeSet::len);
            if n < best_len {
                best_len = n;
                best = Some(match set {
                    Some(s) => Box::new(s.iter()),
                    None => Box::new(std::iter::empty()),
                });
            }
        }
        if let Slot::Bound(p) = &pattern.predicate {
            let set = self.by_predicate.get(p);
            let n = set.map_or(0, BTreeSet::len);
            if n < best_len {
                best_len = n;
                best = Some(match set {
                    Some(s) => Box::new(s.iter()),
                    None => Box::new(std::iter::empty()),
                });
            }
        }
        if let Slot::Bound(o) = &pattern.object {
            let set = self.by_object.get(o);
            let n = set.map_or(0, BTreeSet::len);
            if n < best_len {
                best = Some(match set {
                    Some(s) => Box::new(s.iter()),
                    None => Box::new(std::iter::empty()),
                });
            }
        }
        best.unwrap_or_else(|| Box::new(self.triples.iter()))
    }

    fn subject_range<'a>(&'a self, subject: &Iri) -> impl Iterator<Item = &'a Triple> + 'a {
        self.by_subject.get(subject).into_iter().flatten()
    }

    /// Value of the first attribute triple `(subject, predicate, literal)`.
    pub fn attribute(&self, subject: &Iri, predicate: Predicate) -> Option<&str> {
        self.subject_range(subject)
            .find(|t| t.predicate == predicate)
            .and_then(|t| t.object.as_literal())
    }

    /// Objects of `(subject, predicate, ?o)` that are entities.
    pub fn linked(&self, subject: &Iri, predicate: Predicate) -> Vec<&Iri> {
        self.subject_range(subject)
            .filter(|t| t.predicate == predicate)
            .filter_map(|t| t.object.as_iri())
            .collect()
    }

    pub fn has_subject(&self, subject: &Iri) -> bool {
        self.subject_range(subject).next().is_some()
    }

    /// Subjects that own parameters but carry no `has_expression`.
    /// Loaded dumps may be hand-edited, so this is checked on demand.
    pub fn undocumented_parameter_owners(&self) -> Vec<&Iri> {
        let mut owners: Vec<&Iri> = self
            .by_predicate
            .get(&Predicate::HasParameter)
            .into_iter()
            .flatten()
            .map(|t| &t.subject)
            .filter(|s| self.attribute(s, Predicate::HasExpression).is_none())
            .collect();
        owners.dedup();
        owners
    }
}

/// Extends `bindings` so that `pattern` matches `triple`, if consistent.
pub(crate) fn unify(pattern: &TriplePattern, triple: &Triple, bindings: &Bindings) -> Option<Bindings> {
    let mut out = bindings.clone();
    bind(&mut out, &pattern.subject, Term::Iri(triple.subject.clone()), |s| Term::Iri(s.clone()))?;
    match &pattern.predicate {
        Slot::Bound(p) if *p != triple.predicate => return None,
        Slot::Bound(_) => {}
        Slot::Var(name) => {
            let value = Term::Literal(triple.predicate.as_str().to_string());
            match out.get(name) {
                Some(existing) if *existing != value => return None,
                Some(_) => {}
                None => {
                    out.insert(name.clone(), value);
                }
            }
        }
    }
    bind(&mut out, &pattern.object, triple.object.clone(), Clone::clone)?;
    Some(out)
}

fn bind<T>(out: &mut Bindings, slot: &Slot<T>, value: Term, as_term: impl Fn(&T) -> Term) -> Option<()> {
    match slot {
        Slot::Bound(v) => (as_term(v) == value).then_some(()),
        Slot::Var(name) => match out.get(name) {
            Some(existing) => (*existing == value).then_some(()),
            None => {
                out.insert(name.clone(), value);
                Some(())
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2() -> KnowledgeGraph {
        let api = Iri::entity("numpy.flipud").unwrap();
        let param = Iri::parameter("numpy.flipud", "m").unwrap();
        let mut g = KnowledgeGraph::new();
        g.insert(Triple::attribute(api.clone(), Predicate::HasExpression, "numpy.flipud(m)").unwrap())
            .unwrap();
        g.insert(Triple::new(api.clone(), Predicate::BelongsToLibrary, Iri::entity("numpy").unwrap()).unwrap())
            .unwrap();
        g.insert(Triple::new(api, Predicate::HasParameter, param.clone()).unwrap())
            .unwrap();
        g.insert(Triple::attribute(param, Predicate::HasType, "array_like").unwrap())
            .unwrap();
        g
    }

    #[test]
    fn insert_is_idempotent() {
        let mut g = fig2();
        let n = g.len();
        let t = Triple::attribute(Iri::entity("numpy.flipud").unwrap(), Predicate::HasExpression, "numpy.flipud(m)")
            .unwrap();
        assert!(g.contains(&t));
        assert!(!g.insert(t).unwrap());
        assert_eq!(g.len(), n);
    }

    #[test]
    fn insert_rejects_literal_dependency_object() {
        let mut g = KnowledgeGraph::new();
        let bad = Triple {
            subject: Iri::entity("numpy.flipud").unwrap(),
            predicate: Predicate::BelongsToLibrary,
            object: Term::literal("numpy"),
        };
        let err = g.insert(bad).unwrap_err();
        assert!(err.to_string().contains("object"), "{err}");
        assert!(g.is_empty());
    }

    #[test]
    fn query_expression_of_flipud() {
        let g = fig2();
        let p = TriplePattern::new(
            Slot::Bound(Iri::entity("numpy.flipud").unwrap()),
            Slot::Bound(Predicate::HasExpression),
            Slot::var("o"),
        );
        let hits = g.query(&p);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].bindings["o"], Term::literal("numpy.flipud(m)"));
    }

    #[test]
    fn query_empty_store() {
        assert!(KnowledgeGraph::new().query(&TriplePattern::any()).is_empty());
    }

    #[test]
    fn repeated_variable_must_agree() {
        let mut g = KnowledgeGraph::new();
        let a = Iri::entity("a").unwrap();
        let b = Iri::entity("b").unwrap();
        g.insert(Triple::new(a.clone(), Predicate::HasParameter, a.clone()).unwrap()).unwrap();
        g.insert(Triple::new(a, Predicate::HasParameter, b).unwrap()).unwrap();
        let p = TriplePattern::new(Slot::var("x"), Slot::Bound(Predicate::HasParameter), Slot::var("x"));
        assert_eq!(g.query(&p).len(), 1);
    }

    #[test]
    fn attribute_and_linked_helpers() {
        let g = fig2();
        let api = Iri::entity("numpy.flipud").unwrap();
        assert_eq!(g.attribute(&api, Predicate::HasExpression), Some("numpy.flipud(m)"));
        assert_eq!(g.linked(&api, Predicate::HasParameter).len(), 1);
        assert!(!g.has_subject(&Iri::entity("numpy.flip").unwrap()));
    }
}
