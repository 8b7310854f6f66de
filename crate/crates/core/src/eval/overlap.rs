use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Per-mode results over one corpus: which tasks were attempted and which fixed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedSet {
    pub corpus: BTreeSet<String>,
    pub fixed: BTreeSet<String>,
}

/// One group of modes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub modes: Vec<String>,
    /// Tasks fixed by exactly these modes and no other.
    pub exclusive: usize,
    /// Tasks fixed by all of these modes (others may fix them too).
    pub intersection: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub modes: Vec<String>,
    /// Groups with a nonzero exclusive count, largest first.
    pub rows: Vec<OverlapRow>,
    /// Tasks fixed by no mode.
    pub unfixed: usize,
}

/// Upset-style overlap of fixed task sets. All modes must have been run on
/// the same corpus.
pub fn overlap(sets: &BTreeMap<String, FixedSet>) -> Result<OverlapReport, EvalError> {
    let modes: Vec<String> = sets.keys().cloned().collect();
    let Some(first) = sets.values().next() else {
        return Ok(OverlapReport::default());
    };
    for (mode, s) in sets {
        if s.corpus != first.corpus {
            return Err(EvalError::MismatchedCorpora { mode: mode.clone(), expected: first.corpus.len(), got: s.corpus.len() });
        }
        if let Some(stray) = s.fixed.iter().find(|t| !s.corpus.contains(*t)) {
            return Err(EvalError::MismatchedCorpora { mode: format!("{mode} (task {stray})"), expected: s.corpus.len(), got: s.fixed.len() });
        }
    }

    let mut by_signature: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let mut unfixed = 0;
    for task in &first.corpus {
        let signature: Vec<String> = sets.iter().filter(|(_, s)| s.fixed.contains(task)).map(|(m, _)| m.clone()).collect();
        if signature.is_empty() {
            unfixed += 1;
        } else {
            *by_signature.entry(signature).or_default() += 1;
        }
    }

    let mut rows: Vec<OverlapRow> = by_signature
        .into_iter()
        .map(|(group, exclusive)| {
            let intersection = first.corpus.iter().filter(|t| group.iter().all(|m| sets[m].fixed.contains(*t))).count();
            OverlapRow { modes: group, exclusive, intersection }
        })
        .collect();
    rows.sort_by(|a, b| b.exclusive.cmp(&a.exclusive).then_with(|| a.modes.cmp(&b.modes)));
    Ok(OverlapReport { modes, rows, unfixed })
}
