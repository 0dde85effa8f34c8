//! Relations between selected target and anchor objects, built on demand.
//!
//! Horizontal labels are read in a viewer frame: the forward axis runs from
//! the viewpoint toward the midpoint of the two box centers, and the
//! target's offset from the anchor is classified into 90° sectors around
//! that axis. Measuring from the midpoint makes the labels exactly
//! antisymmetric under swapping target and anchor.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Box3D;
use crate::graph::NodeId;
use crate::prompts::render;

/// Horizontal slack when testing whether a target sits over an anchor.
pub const VERTICAL_XY_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Left,
    Right,
    Back,
    Front,
    Above,
    Below,
}

impl Relation {
    pub fn phrase(self) -> &'static str {
        match self {
            Relation::Left => "to the left of",
            Relation::Right => "to the right of",
            Relation::Back => "behind",
            Relation::Front => "in front of",
            Relation::Above => "above",
            Relation::Below => "below",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).unwrap();
        f.write_str(s.as_str().unwrap())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdgeError {
    #[error("viewpoint coincides with the pair's horizontal midpoint")]
    DegenerateViewpoint,
    #[error("no target objects selected")]
    EmptySelection,
    #[error("object {0} is both target and anchor")]
    OverlappingSelection(NodeId),
    #[error("object {0} is not in the group")]
    UnknownObject(NodeId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticEdge {
    pub target_id: NodeId,
    pub anchor_id: NodeId,
    pub labels: BTreeSet<Relation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEdge {
    pub target_id: NodeId,
    pub anchor_id: NodeId,
    pub distance: f64,
    pub text: String,
}

pub fn semantic_relation(target: &Box3D, anchor: &Box3D, viewpoint: [f64; 2]) -> Result<BTreeSet<Relation>, EdgeError> {
    let (t, a) = (target.center(), anchor.center());
    let mid = [(t[0] + a[0]) / 2.0, (t[1] + a[1]) / 2.0];
    let fwd = [mid[0] - viewpoint[0], mid[1] - viewpoint[1]];
    let norm = fwd[0].hypot(fwd[1]);
    if !(norm > 1e-9) {
        return Err(EdgeError::DegenerateViewpoint);
    }
    let f = [fwd[0] / norm, fwd[1] / norm];
    let d = [t[0] - a[0], t[1] - a[1]];
    let dot = f[0] * d[0] + f[1] * d[1];
    let cross = f[0] * d[1] - f[1] * d[0];

    let mut labels = BTreeSet::new();
    if dot > cross.abs() {
        labels.insert(Relation::Front);
    } else if -dot > cross.abs() {
        labels.insert(Relation::Back);
    } else if cross > dot.abs() {
        labels.insert(Relation::Left);
    } else if -cross > dot.abs() {
        labels.insert(Relation::Right);
    }
    let m = VERTICAL_XY_MARGIN;
    let over = t[0] >= anchor.min[0] - m && t[0] <= anchor.max[0] + m && t[1] >= anchor.min[1] - m && t[1] <= anchor.max[1] + m;
    if over && t[2] > anchor.max[2] {
        labels.insert(Relation::Above);
    } else if over && t[2] < anchor.min[2] {
        labels.insert(Relation::Below);
    }
    Ok(labels)
}

/// Center-to-center distance rounded to 0.1 m.
pub fn center_distance(a: &Box3D, b: &Box3D) -> f64 {
    let (p, q) = (a.center(), b.center());
    let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
    (d * 10.0).round() / 10.0
}

/// `3.0` prints as `3`, `2.5` as `2.5`.
pub fn format_meters(d: f64) -> String {
    if d.fract() == 0.0 {
        format!("{d:.0}")
    } else {
        format!("{d:.1}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeTemplates {
    pub metric: String,
    pub semantic: String,
}

impl Default for EdgeTemplates {
    fn default() -> Self {
        Self {
            metric: "object {tag_a} with id {id_a} is in {d} meters of object {tag_b} with id {id_b}".into(),
            semantic: "object {tag_a} with id {id_a} is {relation} object {tag_b} with id {id_b}".into(),
        }
    }
}

/// An object as seen by the relation builder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRef {
    pub id: NodeId,
    pub tag: String,
    pub bbox: Box3D,
}

pub fn metric_edge(target: &ObjectRef, anchor: &ObjectRef, templates: &EdgeTemplates) -> MetricEdge {
    let distance = center_distance(&target.bbox, &anchor.bbox);
    let text = render(
        &templates.metric,
        &[
            ("tag_a", &target.tag),
            ("id_a", &target.id.to_string()),
            ("d", &format_meters(distance)),
            ("tag_b", &anchor.tag),
            ("id_b", &anchor.id.to_string()),
        ],
    );
    MetricEdge {
        target_id: target.id,
        anchor_id: anchor.id,
        distance,
        text,
    }
}

pub fn semantic_text(target: &ObjectRef, anchor: &ObjectRef, labels: &BTreeSet<Relation>, templates: &EdgeTemplates) -> String {
    let relation = labels.iter().map(|r| r.phrase()).collect::<Vec<_>>().join(" and ");
    render(
        &templates.semantic,
        &[
            ("tag_a", &target.tag),
            ("id_a", &target.id.to_string()),
            ("relation", &relation),
            ("tag_b", &anchor.tag),
            ("id_b", &anchor.id.to_string()),
        ],
    )
}

/// Object-layer subgraph of one group: targets, anchors, and their relations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgraph {
    pub targets: Vec<ObjectRef>,
    pub anchors: Vec<ObjectRef>,
    pub semantic: Vec<SemanticEdge>,
    pub metric: Vec<MetricEdge>,
    pub viewpoint: [f64; 2],
    /// Target×anchor pairs for which relations were computed.
    pub pairs_evaluated: usize,
}

/// Relations for every target×anchor pair, in (target, anchor) id order.
/// Pairs with a degenerate viewpoint get a metric edge only.
pub fn enrich_subgraph(
    group: &[ObjectRef],
    target_ids: &[NodeId],
    anchor_ids: &[NodeId],
    viewpoint: [f64; 2],
) -> Result<Subgraph, EdgeError> {
    enrich_subgraph_with(group, target_ids, anchor_ids, viewpoint, &EdgeTemplates::default())
}

pub fn enrich_subgraph_with(
    group: &[ObjectRef],
    target_ids: &[NodeId],
    anchor_ids: &[NodeId],
    viewpoint: [f64; 2],
    templates: &EdgeTemplates,
) -> Result<Subgraph, EdgeError> {
    if target_ids.is_empty() {
        return Err(EdgeError::EmptySelection);
    }
    let pick = |ids: &[NodeId]| -> Result<Vec<ObjectRef>, EdgeError> {
        let set: BTreeSet<NodeId> = ids.iter().copied().collect();
        set.into_iter()
            .map(|id| group.iter().find(|o| o.id == id).cloned().ok_or(EdgeError::UnknownObject(id)))
            .collect()
    };
    let targets = pick(target_ids)?;
    let anchors = pick(anchor_ids)?;
    if let Some(a) = anchors.iter().find(|a| targets.iter().any(|t| t.id == a.id)) {
        return Err(EdgeError::OverlappingSelection(a.id));
    }
    let mut semantic = Vec::new();
    let mut metric = Vec::new();
    let mut pairs = 0;
    for t in &targets {
        for a in &anchors {
            pairs += 1;
            metric.push(metric_edge(t, a, templates));
            match semantic_relation(&t.bbox, &a.bbox, viewpoint) {
                Ok(labels) if !labels.is_empty() => semantic.push(SemanticEdge {
                    target_id: t.id,
                    anchor_id: a.id,
                    labels,
                }),
                Ok(_) => {}
                Err(EdgeError::DegenerateViewpoint) => {
                    log::debug!("pair ({}, {}): viewpoint on midpoint, no semantic edge", t.id, a.id)
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(Subgraph {
        targets,
        anchors,
        semantic,
        metric,
        viewpoint,
        pairs_evaluated: pairs,
    })
}

/// `"<id>: <tag> [x, y, z]"` with the box center to 0.1 m.
pub fn object_line(o: &ObjectRef) -> String {
    let c = o.bbox.center();
    let r = |v: f64| {
        let v = (v * 10.0).round() / 10.0;
        // avoid printing -0.0
        format!("{:.1}", if v == 0.0 { 0.0 } else { v })
    };
    format!("{}: {} [{}, {}, {}]", o.id, o.tag, r(c[0]), r(c[1]), r(c[2]))
}

impl Subgraph {
    pub fn to_text(&self, templates: &EdgeTemplates) -> String {
        let mut nodes: Vec<&ObjectRef> = self.targets.iter().chain(&self.anchors).collect();
        nodes.sort_by_key(|o| o.id);
        let mut lines: Vec<String> = nodes.iter().map(|o| object_line(o)).collect();
        if !self.metric.is_empty() {
            lines.push("Relations:".into());
        }
        for m in &self.metric {
            lines.push(m.text.clone());
            if let Some(s) = self.semantic.iter().find(|s| s.target_id == m.target_id && s.anchor_id == m.anchor_id) {
                let t = self.targets.iter().find(|o| o.id == s.target_id).unwrap();
                let a = self.anchors.iter().find(|o| o.id == s.anchor_id).unwrap();
                lines.push(semantic_text(t, a, &s.labels, templates));
            }
        }
        lines.join("\n")
    }
}
