//! Evaluation harness: QA dataset ingestion, answer scoring (exact match
//! and token F1), run-level reports with retrieval accounting, and export of
//! run traces as training samples.

mod metrics;
mod sft;

pub use metrics::{em, f1, normalize_answer};
pub use sft::{export_sft, write_sft_jsonl, SftError, SftSample, SftTurn};

use crate::llm::BackendHandle;
use crate::retrieval::Retriever;
use crate::solver::{RunTrace, SolveConfig, Solver};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

/// One QA benchmark item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAItem {
    pub id: String,
    pub question: String,
    /// Gold answers; never empty in a loaded dataset.
    pub golden_answers: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("failed to read dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("dataset line {line}: item `{id}` has no golden answers")]
    NoGoldenAnswers { line: usize, id: String },
}

/// Loads a JSON Lines dataset of `{id, question, golden_answers}` records.
/// Blank lines are skipped.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<QAItem>, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let item: QAItem = serde_json::from_str(line)
            .map_err(|source| DatasetError::Json { line: line_no, source })?;
        if item.golden_answers.is_empty() {
            return Err(DatasetError::NoGoldenAnswers { line: line_no, id: item.id });
        }
        items.push(item);
    }
    Ok(items)
}

/// Per-item scoring row of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemReport {
    pub id: String,
    pub em: f64,
    pub f1: f64,
    pub retrievals: usize,
    pub kbd_skips: usize,
    /// Failure note when the run aborted; such items score 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Aggregated evaluation results. Averages are `null` on an empty dataset;
/// `kbd_skip_rate` is `null` when no Retrieval sub-problem ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub avg_em: Option<f64>,
    pub avg_f1: Option<f64>,
    pub avg_retrievals_per_sample: Option<f64>,
    /// Fraction of Retrieval sub-problems the boundary gate answered
    /// directly, skipping their depth search.
    pub kbd_skip_rate: Option<f64>,
    pub per_item: Vec<ItemReport>,
}

/// A finished evaluation: the report plus the trace behind every item, in
/// dataset order. Failed runs keep their partial trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub report: EvalReport,
    pub traces: Vec<RunTrace>,
}

/// Runs every item through the solver and scores the final answers.
/// Per-item failures score 0 and carry an error note; the run continues.
/// Items fan out over at most `workers` threads (at least one); each item
/// gets its own backend via [`BackendHandle::for_run`].
pub fn run_eval(
    dataset: &[QAItem],
    backend: &BackendHandle,
    retriever: &Arc<dyn Retriever>,
    config: &SolveConfig,
    workers: usize,
) -> EvalRun {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<(ItemReport, RunTrace)>>> =
        Mutex::new((0..dataset.len()).map(|_| None).collect());
    let worker_count = workers.max(1).min(dataset.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = dataset.get(i) else { break };
                let solver = Solver::new(backend.for_run(), Arc::clone(retriever), config.clone());
                let outcome = score_item(item, &solver);
                slots.lock().expect("scoring never panics")[i] = Some(outcome);
            });
        }
    });

    let (per_item, traces): (Vec<_>, Vec<_>) = slots
        .into_inner()
        .expect("scoring never panics")
        .into_iter()
        .map(|slot| slot.expect("every index was dispatched"))
        .unzip();
    EvalRun { report: aggregate(per_item, &traces), traces }
}

fn score_item<B, R>(item: &QAItem, solver: &Solver<B, R>) -> (ItemReport, RunTrace)
where
    B: crate::llm::ChatBackend,
    R: Retriever,
{
    match solver.run_question(&item.question) {
        Ok(trace) => {
            let pred = trace.final_answer.clone().unwrap_or_default();
            let report = ItemReport {
                id: item.id.clone(),
                em: em(&pred, &item.golden_answers),
                f1: f1(&pred, &item.golden_answers),
                retrievals: trace.counters.retrievals,
                kbd_skips: trace.counters.kbd_skips,
                error: None,
            };
            (report, trace)
        }
        Err(failure) => {
            let report = ItemReport {
                id: item.id.clone(),
                em: 0.0,
                f1: 0.0,
                retrievals: failure.trace.counters.retrievals,
                kbd_skips: failure.trace.counters.kbd_skips,
                error: Some(failure.error.to_string()),
            };
            (report, failure.trace)
        }
    }
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> Option<f64> {
    (n > 0).then(|| values.sum::<f64>() / n as f64)
}

fn aggregate(per_item: Vec<ItemReport>, traces: &[RunTrace]) -> EvalReport {
    let n = per_item.len();
    let retrieval_subs: usize = traces.iter().map(RunTrace::retrieval_sub_count).sum();
    let skips: usize = per_item.iter().map(|item| item.kbd_skips).sum();
    EvalReport {
        n,
        avg_em: mean(per_item.iter().map(|item| item.em), n),
        avg_f1: mean(per_item.iter().map(|item| item.f1), n),
        avg_retrievals_per_sample: mean(per_item.iter().map(|item| item.retrievals as f64), n),
        kbd_skip_rate: (retrieval_subs > 0).then(|| skips as f64 / retrieval_subs as f64),
        per_item,
    }
}
