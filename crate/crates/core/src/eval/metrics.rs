use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::geometry::{box3d_iou, BinaryMask, Box3D};

pub const DEFAULT_IOU_THRESHOLDS: [f64; 4] = [0.1, 0.25, 0.5, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub delta: f64,
}

impl MatchReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, delta: f64) -> Self {
        if tp + fp + fn_ == 0 {
            // nothing predicted and nothing to find
            return Self { tp, fp, fn_, precision: 1.0, recall: 1.0, f1: 1.0, delta };
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { tp, fp, fn_, precision, recall, f1, delta }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchOrder {
    /// Predictions sorted by their best IoU against all ground truth, descending.
    #[default]
    BestIou,
    /// Predictions in the order given.
    Input,
}

fn iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    a.iou(b).unwrap_or(0.0)
}

/// Greedy matching: each prediction takes its highest-IoU remaining ground
/// truth (ties to the lower index) and scores a TP when that IoU exceeds `delta`.
pub fn match_masks(pred: &[BinaryMask], gt: &[BinaryMask], delta: f64, order: MatchOrder) -> Result<MatchReport, EvalError> {
    for m in pred.iter().chain(gt) {
        let f = m.frame;
        let g = pred.first().or(gt.first()).unwrap().frame;
        if (f.height, f.width) != (g.height, g.width) {
            return Err(EvalError::Mismatch("masks must share one frame".into()));
        }
    }
    let table: Vec<Vec<f64>> = pred.iter().map(|p| gt.iter().map(|g| iou(p, g)).collect()).collect();
    let mut idx: Vec<usize> = (0..pred.len()).collect();
    if order == MatchOrder::BestIou {
        let best = |i: usize| table[i].iter().copied().fold(0.0, f64::max);
        idx.sort_by(|&a, &b| best(b).total_cmp(&best(a)).then(a.cmp(&b)));
    }
    let mut remaining = vec![true; gt.len()];
    let (mut tp, mut fp) = (0, 0);
    for i in idx {
        let mut choice: Option<(usize, f64)> = None;
        for (j, &v) in table[i].iter().enumerate() {
            if remaining[j] && choice.is_none_or(|(_, b)| v > b) {
                choice = Some((j, v));
            }
        }
        match choice {
            Some((j, v)) if v > delta => {
                remaining[j] = false;
                tp += 1;
            }
            _ => fp += 1,
        }
    }
    let fn_ = remaining.iter().filter(|&&r| r).count();
    Ok(MatchReport::from_counts(tp, fp, fn_, delta))
}

/// F1 at each threshold.
pub fn f1_sweep(pred: &[BinaryMask], gt: &[BinaryMask], deltas: &[f64], order: MatchOrder) -> Result<Vec<MatchReport>, EvalError> {
    deltas.iter().map(|&d| match_masks(pred, gt, d, order)).collect()
}

/// Share of queries whose predicted box has IoU strictly above each
/// threshold; a missing prediction is a miss.
pub fn acc_at_iou(pred: &[Option<Box3D>], gt: &[Box3D], thresholds: &[f64]) -> Result<Vec<(f64, f64)>, EvalError> {
    if gt.is_empty() {
        return Err(EvalError::EmptyBenchmark);
    }
    if pred.len() != gt.len() {
        return Err(EvalError::Mismatch(format!("{} predictions for {} queries", pred.len(), gt.len())));
    }
    let ious: Vec<f64> = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| p.as_ref().map_or(0.0, |p| box3d_iou(p, g).unwrap_or(0.0)))
        .collect();
    Ok(thresholds
        .iter()
        .map(|&t| (t, ious.iter().filter(|&&v| v > t).count() as f64 / gt.len() as f64))
        .collect())
}

/// Area under the top-k accuracy curve: mean accuracy over k = 1..K, as a
/// percentage, where K is the label-set size.
pub fn auc_topk(rankings: &[Vec<String>], gt: &[String], label_set: &[String]) -> Result<f64, EvalError> {
    if rankings.len() != gt.len() {
        return Err(EvalError::Mismatch(format!("{} rankings for {} labels", rankings.len(), gt.len())));
    }
    if gt.is_empty() {
        return Err(EvalError::EmptyBenchmark);
    }
    let k_max = label_set.len();
    let mut hits_at = vec![0usize; k_max + 1];
    for (ranking, label) in rankings.iter().zip(gt) {
        if !label_set.contains(label) {
            return Err(EvalError::LabelSetError(label.clone()));
        }
        if let Some(rank) = ranking.iter().position(|l| l == label) {
            if rank < k_max {
                hits_at[rank + 1] += 1;
            }
        }
    }
    let n = gt.len() as f64;
    let mut cumulative = 0usize;
    let mut total = 0.0;
    for k in 1..=k_max {
        cumulative += hits_at[k];
        total += cumulative as f64 / n;
    }
    Ok(100.0 * total / k_max as f64)
}
