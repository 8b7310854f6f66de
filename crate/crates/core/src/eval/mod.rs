//! Evaluation harness: the single-shot repair loop over a task corpus,
//! a bounded worker pool, the outcome ledger and the derived metrics.

mod ledger;
mod metrics;
mod overlap;
mod repair;
mod task;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::bug::{Runner, RunnerError};
use crate::llm::{ChatExchange, CostModel, LlmClient};
use crate::prompt::PromptMode;

pub use ledger::{metrics_from_ledger, parse_ledger, read_ledger, LedgerWriter, RunKey};
pub use metrics::{format_fix_rate, Aggregate, LibraryMetrics, RunMetrics};
pub use overlap::{overlap, FixedSet, OverlapReport, OverlapRow};
pub use repair::{repair_task, ExchangeRef, KnowledgeSource, OutcomeStatus, RepairOutcome, RepairSettings};
pub use task::{load_corpus, parse_corpus, CorpusError, TaskRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("mode {0} needs a knowledge source (a graph dump or plain-text docs)")]
    MissingKnowledge(PromptMode),
    #[error("mode {mode} was evaluated on a different corpus ({got} tasks, expected {expected})")]
    MismatchedCorpora { mode: String, expected: usize, got: usize },
    #[error("runner: {0}")]
    Runner(#[from] RunnerError),
    #[error("{0}")]
    Io(String),
    #[error("invalid evaluation settings: {0}")]
    Invalid(String),
}

/// Builds one runner per worker.
pub type RunnerFactory<'a> = dyn Fn() -> Result<Box<dyn Runner>, RunnerError> + Sync + 'a;

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub settings: RepairSettings,
    /// All outcomes, repetition-major, corpus order within a repetition.
    pub outcomes: Vec<RepairOutcome>,
    pub exchanges: Vec<ChatExchange>,
    pub metrics: Vec<RunMetrics>,
    pub aggregate: Aggregate,
}

impl Evaluation {
    /// Outcomes of the median repetition.
    pub fn median_outcomes(&self) -> impl Iterator<Item = &RepairOutcome> {
        let rep = self.aggregate.median_repetition;
        self.outcomes.iter().filter(move |o| o.repetition == rep)
    }

    /// The median repetition's attempted and fixed task ids, for overlap analysis.
    pub fn fixed_set(&self) -> FixedSet {
        let mut s = FixedSet::default();
        for o in self.median_outcomes().filter(|o| o.counts()) {
            s.corpus.insert(o.task_id.clone());
            if o.passed {
                s.fixed.insert(o.task_id.clone());
            }
        }
        s
    }

    pub fn median_metrics(&self) -> &RunMetrics {
        &self.metrics[self.aggregate.median_repetition]
    }
}

type TaskResult = (RepairOutcome, Vec<ChatExchange>);

/// Runs the corpus `repetitions` times. Within a repetition, tasks are spread
/// over `workers` threads, each owning its runner; repetitions run in turn.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    tasks: &[TaskRecord],
    settings: &RepairSettings,
    repetitions: usize,
    workers: usize,
    knowledge: KnowledgeSource<'_>,
    runner_factory: &RunnerFactory<'_>,
    client: &LlmClient,
    prices: &CostModel,
    ledger: Option<&LedgerWriter>,
) -> Result<Evaluation, EvalError> {
    if repetitions == 0 {
        return Err(EvalError::Invalid("repetitions must be at least 1".into()));
    }
    let ids: BTreeSet<&str> = tasks.iter().map(|t| t.id.as_str()).collect();
    if ids.len() != tasks.len() {
        return Err(EvalError::Invalid("task ids are not unique".into()));
    }
    let workers = workers.clamp(1, tasks.len().max(1));
    let runners: Vec<Mutex<Box<dyn Runner>>> =
        (0..workers).map(|_| runner_factory().map(Mutex::new)).collect::<Result<_, _>>()?;

    let mut outcomes = Vec::with_capacity(tasks.len() * repetitions);
    let mut exchanges = Vec::new();
    let mut metrics = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let slots: Vec<Mutex<Option<TaskResult>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let failure: Mutex<Option<EvalError>> = Mutex::new(None);
        std::thread::scope(|scope| {
            for runner in &runners {
                let (slots, next, failure) = (&slots, &next, &failure);
                scope.spawn(move || {
                    let mut runner = runner.lock().expect("runner lock");
                    loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        if i >= tasks.len() || failure.lock().expect("failure lock").is_some() {
                            break;
                        }
                        let result = repair_task(&tasks[i], settings, knowledge, &mut **runner, client, rep)
                            .and_then(|(o, ex)| {
                                if let Some(l) = ledger {
                                    l.append(&o)?;
                                }
                                Ok((o, ex))
                            });
                        match result {
                            Ok(r) => *slots[i].lock().expect("slot lock") = Some(r),
                            Err(e) => {
                                failure.lock().expect("failure lock").get_or_insert(e);
                                break;
                            }
                        }
                    }
                });
            }
        });
        if let Some(e) = failure.into_inner().expect("failure lock") {
            return Err(e);
        }
        let done: Vec<(RepairOutcome, Vec<ChatExchange>)> =
            slots.into_iter().map(|s| s.into_inner().expect("slot lock").expect("every task ran")).collect();
        metrics.push(RunMetrics::from_outcomes(done.iter().map(|(o, _)| o), prices));
        for (o, ex) in done {
            log::info!("rep {rep} task {}: {:?}", o.task_id, o.status);
            outcomes.push(o);
            exchanges.extend(ex);
        }
    }
    let anf: Vec<u64> = metrics.iter().map(|m| m.anf).collect();
    let aggregate = Aggregate::from_anf(&anf).expect("at least one repetition");
    Ok(Evaluation { settings: *settings, outcomes, exchanges, metrics, aggregate })
}
