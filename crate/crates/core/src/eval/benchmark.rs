use serde::{Deserialize, Serialize};

use super::{acc_at_iou, EvalError, DEFAULT_IOU_THRESHOLDS};
use crate::geometry::{box3d_iou, Box3D};
use crate::graph::{NodeId, SceneGraph};
use crate::llm::{CallLog, CallRecord, ChatClient};
use crate::reasoning::{run_pipeline, ReasoningConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkItem {
    pub query: String,
    pub gt_box: Box3D,
}

pub fn parse_benchmark(text: &str) -> Result<Vec<BenchmarkItem>, EvalError> {
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: BenchmarkItem =
            serde_json::from_str(line).map_err(|e| EvalError::Parse { line: i + 1, msg: e.to_string() })?;
        Box3D::new(item.gt_box.min, item.gt_box.max)
            .map_err(|e| EvalError::Parse { line: i + 1, msg: e.to_string() })?;
        items.push(item);
    }
    Ok(items)
}

pub fn items_to_jsonl(items: &[BenchmarkItem]) -> String {
    items.iter().map(|i| serde_json::to_string(i).expect("item serializes") + "\n").collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub index: usize,
    pub query: String,
    pub object_id: Option<NodeId>,
    pub pred_box: Option<Box3D>,
    pub iou: f64,
    pub error: Option<String>,
    pub calls: usize,
    /// Upper bound on client calls for this query: 3 + groups + 2.
    pub call_bound: usize,
    pub pairs_evaluated: usize,
    /// Sum over groups of |targets| * |anchors|.
    pub pairs_expected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub queries: Vec<QueryResult>,
    pub accuracy: Vec<(f64, f64)>,
    #[serde(skip)]
    pub transcript: Vec<CallRecord>,
}

impl BenchmarkReport {
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:>5}  {:>9}  {:>6}  {:>5}  query\n", "#", "object", "iou", "calls"));
        for q in &self.queries {
            let obj = q.object_id.map_or_else(|| "-".to_owned(), |id| id.to_string());
            out.push_str(&format!("{:>5}  {:>9}  {:>6.3}  {:>5}  {}\n", q.index, obj, q.iou, q.calls, q.query));
        }
        out.push('\n');
        out.push_str(&format!("{:>10}  {:>8}\n", "threshold", "accuracy"));
        for (t, a) in &self.accuracy {
            out.push_str(&format!("{:>10}  {:>8.4}\n", format!("Acc@{t}"), a));
        }
        out
    }
}

/// Runs every item through the query pipeline. A failing query is recorded as
/// a miss and the run continues.
pub fn run_benchmark(
    graph: &SceneGraph,
    items: &[BenchmarkItem],
    llm: &dyn ChatClient,
    cfg: &ReasoningConfig,
) -> Result<BenchmarkReport, EvalError> {
    if items.is_empty() {
        return Err(EvalError::EmptyBenchmark);
    }
    let mut queries = Vec::with_capacity(items.len());
    let mut transcript = Vec::new();
    for (index, item) in items.iter().enumerate() {
        let log = CallLog::new();
        let res = run_pipeline(graph, &item.query, llm, &log, cfg);
        let calls = log.len();
        transcript.extend(log.records());
        let q = match res {
            Ok(out) => {
                let groups = out.trace.groups.len();
                QueryResult {
                    index,
                    query: item.query.clone(),
                    object_id: Some(out.result.object_id),
                    pred_box: Some(out.result.bbox),
                    iou: box3d_iou(&out.result.bbox, &item.gt_box).unwrap_or(0.0),
                    error: None,
                    calls,
                    call_bound: 3 + groups + 2,
                    pairs_evaluated: out.trace.pairs_evaluated,
                    pairs_expected: out.trace.groups.iter().map(|g| g.target_ids.len() * g.anchor_ids.len()).sum(),
                }
            }
            Err(e) => {
                log::warn!("query {index} failed: {e}");
                QueryResult {
                    index,
                    query: item.query.clone(),
                    object_id: None,
                    pred_box: None,
                    iou: 0.0,
                    error: Some(e.to_string()),
                    calls,
                    call_bound: 3 + graph.rooms.len() + 2,
                    pairs_evaluated: 0,
                    pairs_expected: 0,
                }
            }
        };
        queries.push(q);
    }
    let preds: Vec<Option<Box3D>> = queries.iter().map(|q| q.pred_box).collect();
    let gts: Vec<Box3D> = items.iter().map(|i| i.gt_box).collect();
    let accuracy = acc_at_iou(&preds, &gts, &DEFAULT_IOU_THRESHOLDS)?;
    Ok(BenchmarkReport { queries, accuracy, transcript })
}
