use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::repair::RepairOutcome;
use crate::llm::{cost, CostModel, Usage};

/// Formats `anf / n` as a percentage with two decimals, rounding half up.
/// Uses integer arithmetic so the rounding is exact.
pub fn format_fix_rate(anf: u64, n: u64) -> String {
    if n == 0 {
        return "0.00%".to_string();
    }
    let hundredths = (anf as u128 * 20_000 + n as u128) / (2 * n as u128);
    format!("{}.{:02}%", hundredths / 100, hundredths % 100)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LibraryMetrics {
    pub anf: u64,
    pub n_tasks: u64,
    pub fr: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub anf: u64,
    /// Buggy tasks attempted; tasks whose original code passes are excluded.
    pub n_tasks: u64,
    pub fr: f64,
    /// Mean input+output tokens per task over usage-known exchanges.
    pub tu: f64,
    /// Total spend in USD.
    pub ms: f64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub requests: u64,
    /// Exchanges without provider-reported usage, excluded from TU and MS.
    pub usage_unknown: u64,
    pub flagged_for_review: u64,
    pub not_buggy: u64,
    pub per_library: BTreeMap<String, LibraryMetrics>,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl RunMetrics {
    /// Metrics of one repetition. A pure function of the outcomes.
    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a RepairOutcome>, prices: &CostModel) -> Self {
        let mut m = RunMetrics::default();
        let mut usages: Vec<Usage> = Vec::new();
        for o in outcomes {
            if !o.counts() {
                m.not_buggy += 1;
                continue;
            }
            m.n_tasks += 1;
            let lib = m.per_library.entry(o.library.clone()).or_default();
            lib.n_tasks += 1;
            if o.passed {
                m.anf += 1;
                lib.anf += 1;
            }
            m.flagged_for_review += u64::from(o.flagged_for_review);
            for ex in &o.exchanges {
                m.requests += 1;
                match ex.usage {
                    Some(u) => usages.push(u),
                    None => m.usage_unknown += 1,
                }
            }
        }
        if m.usage_unknown > 0 {
            log::warn!("{} exchanges reported no token usage; they are left out of TU and MS", m.usage_unknown);
        }
        m.input_tokens = usages.iter().map(|u| u.input_tokens).sum();
        m.output_tokens = usages.iter().map(|u| u.output_tokens).sum();
        m.fr = ratio(m.anf, m.n_tasks);
        m.tu = ratio(m.input_tokens + m.output_tokens, m.n_tasks);
        m.ms = cost(&usages, prices);
        for lib in m.per_library.values_mut() {
            lib.fr = ratio(lib.anf, lib.n_tasks);
        }
        m
    }

    pub fn fix_rate_display(&self) -> String {
        format_fix_rate(self.anf, self.n_tasks)
    }
}

impl fmt::Display for RunMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14} {:>5} {:>6} {:>9}", "library", "ANF", "N", "FR")?;
        for (name, lib) in &self.per_library {
            writeln!(f, "{:<14} {:>5} {:>6} {:>9}", name, lib.anf, lib.n_tasks, format_fix_rate(lib.anf, lib.n_tasks))?;
        }
        writeln!(f, "{:<14} {:>5} {:>6} {:>9}", "total", self.anf, self.n_tasks, self.fix_rate_display())?;
        write!(f, "TU {:.2} tokens/task, MS ${:.5}", self.tu, self.ms)?;
        if self.usage_unknown > 0 {
            write!(f, " ({} exchanges without usage excluded)", self.usage_unknown)?;
        }
        Ok(())
    }
}

/// Repeated runs summarized: the median repetition plus the spread of ANF.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Index into the repetitions of the run whose ANF is the median.
    pub median_repetition: usize,
    pub median_anf: u64,
    pub mean_anf: f64,
    /// Population standard deviation.
    pub std_anf: f64,
    pub anf_per_repetition: Vec<u64>,
}

impl Aggregate {
    /// Median by ANF (lower middle for even counts, earliest run among
    /// ties). Always an observed run. `None` for no runs.
    pub fn from_anf(anf: &[u64]) -> Option<Self> {
        if anf.is_empty() {
            return None;
        }
        let mut sorted = anf.to_vec();
        sorted.sort_unstable();
        let median = sorted[(anf.len() - 1) / 2];
        let median_repetition = anf.iter().position(|&a| a == median).unwrap_or(0);
        let n = anf.len() as f64;
        let mean_anf = anf.iter().map(|&a| a as f64).sum::<f64>() / n;
        let var = anf.iter().map(|&a| (a as f64 - mean_anf).powi(2)).sum::<f64>() / n;
        Some(Self {
            median_repetition,
            median_anf: anf[median_repetition],
            mean_anf,
            std_anf: var.sqrt(),
            anf_per_repetition: anf.to_vec(),
        })
    }

    /// `mean ± std` with two decimals.
    pub fn spread_display(&self) -> String {
        format!("{:.2} ± {:.2}", self.mean_anf, self.std_anf)
    }
}
