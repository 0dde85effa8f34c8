//! A chat client that answers reasoning prompts from ground truth. It is
//! used once, while generating a fixture, to record the scripted transcript.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use serde_json::json;

use super::queries::QueryPlan;
use super::scene::GroundTruth;
use crate::geometry::box3d_iou;
use crate::graph::{NodeId, SceneGraph};
use crate::llm::{ChatClient, ChatMessage, LlmError};

/// Ground-truth object to graph node, greedy by descending box IoU among
/// nodes with the same tag.
pub fn match_objects(gt: &GroundTruth, graph: &SceneGraph) -> BTreeMap<u32, NodeId> {
    let mut cands = Vec::new();
    for o in &gt.objects {
        for n in graph.objects.values().filter(|n| n.primary_tag == o.tag) {
            let iou = box3d_iou(&o.bbox, &n.bbox).unwrap_or(0.0);
            if iou > 0.0 {
                cands.push((iou, o.id, n.id));
            }
        }
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = BTreeMap::new();
    let mut used = BTreeSet::new();
    for (_, g, n) in cands {
        if !out.contains_key(&g) && used.insert(n) {
            out.insert(g, n);
        }
    }
    out
}

pub struct Oracle<'a> {
    graph: &'a SceneGraph,
    node_of: BTreeMap<u32, NodeId>,
    current: Mutex<Option<QueryPlan>>,
    target_tag: Mutex<String>,
}

/// `(id, tag)` from listing lines shaped like `3: chair [..]` or `3: chair`.
fn listed(text: &str) -> Vec<(NodeId, String)> {
    text.lines()
        .filter_map(|l| {
            let (id, rest) = l.split_once(": ")?;
            let id: NodeId = id.trim().parse().ok()?;
            let tag = rest.split(" [").next().unwrap_or(rest).trim().to_owned();
            Some((id, tag))
        })
        .collect()
}

impl<'a> Oracle<'a> {
    pub fn new(gt: &GroundTruth, graph: &'a SceneGraph) -> Self {
        Self {
            graph,
            node_of: match_objects(gt, graph),
            current: Mutex::new(None),
            target_tag: Mutex::new(String::new()),
        }
    }

    pub fn node_of(&self, gt_id: u32) -> Option<NodeId> {
        self.node_of.get(&gt_id).copied()
    }

    pub fn set_query(&self, plan: &QueryPlan, target_tag: &str) {
        *self.current.lock().unwrap() = Some(plan.clone());
        *self.target_tag.lock().unwrap() = target_tag.to_owned();
    }

    fn answer(&self, prompt: &str) -> Option<String> {
        let plan = self.current.lock().unwrap().clone()?;
        let t_tag = self.target_tag.lock().unwrap().clone();
        let node = self.graph.objects.get(&self.node_of(plan.target)?)?;
        let room = node.room_id?;
        let anchors: Vec<NodeId> = match &plan.anchor_tag {
            Some(a) => self
                .graph
                .objects
                .values()
                .filter(|o| o.room_id == Some(room) && &o.primary_tag == a)
                .map(|o| o.id)
                .collect(),
            None => Vec::new(),
        };
        let ids = |v: Vec<NodeId>| json!({ "ids": v }).to_string();
        if prompt.contains("The floors of the scene graph") {
            return Some(ids(vec![self.graph.rooms[&room].floor_index]));
        }
        if prompt.contains("The rooms of the scene graph") {
            return Some(ids(vec![room]));
        }
        if prompt.contains("The locations of the scene graph") {
            let locs: BTreeSet<NodeId> = std::iter::once(node.location_id)
                .chain(anchors.iter().map(|a| self.graph.objects[a].location_id))
                .flatten()
                .collect();
            return Some(ids(locs.into_iter().collect()));
        }
        if prompt.contains("\"target_ids\"") {
            let entries = listed(prompt);
            let targets: Vec<NodeId> = entries.iter().filter(|(_, t)| *t == t_tag).map(|(i, _)| *i).collect();
            let anchors: Vec<NodeId> = entries
                .iter()
                .filter(|(i, _)| anchors.contains(i))
                .map(|(i, _)| *i)
                .collect();
            return Some(json!({ "target_ids": targets, "anchor_ids": anchors }).to_string());
        }
        if prompt.contains("\"object_id\"") {
            let reasoning = match &plan.anchor_tag {
                Some(a) => format!("The query asks for the {t_tag} closest to a {a}. Object {} is that {t_tag}.", node.id),
                None => format!("The query asks for the {t_tag} of one room. Object {} is the only {t_tag} there.", node.id),
            };
            return Some(
                json!({
                    "reasoning": reasoning,
                    "explanation": format!("{} {} matches the query.", t_tag, node.id),
                    "object_id": node.id,
                })
                .to_string(),
            );
        }
        None
    }
}

impl ChatClient for Oracle<'_> {
    fn send(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let prompt = messages.last().map(|m| m.content.as_str()).unwrap_or("");
        self.answer(prompt).ok_or_else(|| LlmError::NotConfigured("oracle has no answer for this request".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_lines_parse() {
        let l = listed("Objects:\n3: coffee table [1.0, 2.0, 0.3]\n12: tv\nRelations:\nobject tv with id 12 is in 1.0 meters");
        assert_eq!(l, vec![(3, "coffee table".to_string()), (12, "tv".to_string())]);
    }
}
