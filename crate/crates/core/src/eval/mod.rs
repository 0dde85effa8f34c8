//! Evaluation metrics and the grounding benchmark harness.

mod benchmark;
mod locations;
mod metrics;
mod similarity;

pub use benchmark::{items_to_jsonl, parse_benchmark, run_benchmark, BenchmarkItem, BenchmarkReport, QueryResult};
pub use locations::{evaluate_locations, FloorSweep, GtFloor, LocationEval};
pub use metrics::{acc_at_iou, auc_topk, f1_sweep, match_masks, MatchOrder, MatchReport, DEFAULT_IOU_THRESHOLDS};
pub use similarity::{rank_labels, trigram_cosine};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("benchmark is empty")]
    EmptyBenchmark,
    #[error("ground-truth label {0:?} is not in the label set")]
    LabelSetError(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("benchmark line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
