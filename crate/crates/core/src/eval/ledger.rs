use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use super::metrics::RunMetrics;
use super::repair::RepairOutcome;
use super::EvalError;
use crate::llm::CostModel;

/// Appends outcomes as JSON lines. One writer serializes all workers.
pub struct LedgerWriter {
    out: Mutex<BufWriter<File>>,
}

impl LedgerWriter {
    pub fn append_to(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self { out: Mutex::new(BufWriter::new(file)) })
    }

    pub fn append(&self, outcome: &RepairOutcome) -> Result<(), EvalError> {
        let line = serde_json::to_string(outcome).expect("serializable outcome");
        let mut out = self.out.lock().expect("ledger lock");
        writeln!(out, "{line}").and_then(|_| out.flush()).map_err(|e| EvalError::Io(e.to_string()))
    }
}

pub fn parse_ledger(text: &str) -> Result<Vec<RepairOutcome>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| EvalError::Io(format!("ledger line {}: {e}", i + 1))))
        .collect()
}

pub fn read_ledger(path: impl AsRef<Path>) -> Result<Vec<RepairOutcome>, EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    parse_ledger(&text)
}

/// Key of one evaluated configuration: `(mode, richness)` names.
pub type RunKey = (String, String);

/// Recomputes per-repetition metrics from ledger outcomes, grouped by
/// configuration; repetitions appear in ascending order.
pub fn metrics_from_ledger(outcomes: &[RepairOutcome], prices: &CostModel) -> BTreeMap<RunKey, Vec<RunMetrics>> {
    let mut grouped: BTreeMap<RunKey, BTreeMap<usize, Vec<&RepairOutcome>>> = BTreeMap::new();
    for o in outcomes {
        grouped
            .entry((o.mode.as_str().to_string(), o.richness.as_str().to_string()))
            .or_default()
            .entry(o.repetition)
            .or_default()
            .push(o);
    }
    grouped
        .into_iter()
        .map(|(key, reps)| {
            let metrics = reps.into_values().map(|os| RunMetrics::from_outcomes(os, prices)).collect();
            (key, metrics)
        })
        .collect()
}
