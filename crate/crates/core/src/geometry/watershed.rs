//! Seeded priority flood over a distance field.
//!
//! Cells are claimed one at a time in order of decreasing field value (ties:
//! lower linear index first), restricted to the 4-connected frontier of the
//! already labeled region. A claimed cell takes the label of its
//! earliest-labeled 4-neighbor. Barrier cells are never labeled.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{BinaryMask, DistanceField, GeometryError, LabelGrid, Result};

#[derive(PartialEq)]
struct Entry {
    value: f64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn watershed(edf: &DistanceField, seeds: &LabelGrid, barrier: &BinaryMask) -> Result<LabelGrid> {
    let frame = edf.frame;
    if seeds.labels.len() != frame.len() || barrier.values.len() != frame.len() {
        return Err(GeometryError::ShapeMismatch(
            "seeds and barrier must share the field's frame".into(),
        ));
    }
    let n = frame.len();
    let mut labels = vec![0u32; n];
    let mut order = vec![u64::MAX; n];
    let mut queued = vec![false; n];
    let mut step = 0u64;
    for i in 0..n {
        if seeds.labels[i] != 0 && !barrier.values[i] {
            labels[i] = seeds.labels[i];
            order[i] = step;
            step += 1;
        }
    }
    if step == 0 {
        return Err(GeometryError::NoSeeds);
    }
    let mut heap = BinaryHeap::new();
    let enqueue_neighbors = |i: usize, labels: &[u32], heap: &mut BinaryHeap<Entry>, queued: &mut [bool]| {
        for j in frame.neighbors(i, false) {
            if labels[j] == 0 && !barrier.values[j] && !queued[j] {
                queued[j] = true;
                heap.push(Entry {
                    value: edf.values[j],
                    index: j,
                });
            }
        }
    };
    for i in 0..n {
        if labels[i] != 0 {
            enqueue_neighbors(i, &labels, &mut heap, &mut queued);
        }
    }
    while let Some(Entry { index, .. }) = heap.pop() {
        let Some(from) = frame
            .neighbors(index, false)
            .filter(|&j| labels[j] != 0)
            .min_by_key(|&j| order[j])
        else {
            continue;
        };
        labels[index] = labels[from];
        order[index] = step;
        step += 1;
        enqueue_neighbors(index, &labels, &mut heap, &mut queued);
    }
    Ok(LabelGrid { frame, labels })
}
