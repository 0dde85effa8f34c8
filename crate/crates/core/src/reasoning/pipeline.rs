use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::json::{parse_or_repair, RepairBudget};
use super::{ErrorKind, ReasoningError, Stage};
use crate::edges::{enrich_subgraph_with, EdgeTemplates, ObjectRef, Subgraph};
use crate::geometry::Box3D;
use crate::graph::{node_line, NodeId, NodeKind, SceneGraph};
use crate::llm::{CallLog, ChatClient, Logged};
use crate::prompts::PromptSet;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReasoningConfig {
    pub prompts: PromptSet,
    pub edge_templates: EdgeTemplates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingResult {
    pub object_id: NodeId,
    pub bbox: Box3D,
    pub reasoning: String,
    pub explanation: String,
    pub raw_response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedGroup {
    pub room_id: NodeId,
    pub room_tag: String,
    pub subgraph: Subgraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTrace {
    pub room_id: NodeId,
    pub target_ids: Vec<NodeId>,
    pub anchor_ids: Vec<NodeId>,
    pub pairs_evaluated: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub floors: Vec<NodeId>,
    pub rooms: Vec<NodeId>,
    pub locations: Vec<NodeId>,
    pub groups: Vec<GroupTrace>,
    pub pairs_evaluated: usize,
    pub calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingOutcome {
    pub result: GroundingResult,
    pub trace: Trace,
}

fn id_list(v: &Value, key: &str) -> Option<Vec<NodeId>> {
    let arr = match v {
        Value::Array(a) => a,
        Value::Object(o) => o.get(key)?.as_array()?,
        _ => return None,
    };
    arr.iter().map(|x| x.as_u64().and_then(|n| NodeId::try_from(n).ok())).collect()
}

fn keep_known(ids: Vec<NodeId>, known: &BTreeSet<NodeId>, what: &str) -> Vec<NodeId> {
    let mut out = BTreeSet::new();
    for id in ids {
        if known.contains(&id) {
            out.insert(id);
        } else {
            log::warn!("LLM selected unknown {what} id {id}; dropped");
        }
    }
    out.into_iter().collect()
}

fn select_related_inner(
    entities: &[(NodeId, String)],
    layer: NodeKind,
    query: &str,
    llm: &dyn ChatClient,
    prompts: &PromptSet,
    budget: &RepairBudget,
) -> Result<Vec<NodeId>, ErrorKind> {
    if entities.is_empty() {
        return Ok(Vec::new());
    }
    let listing = entities.iter().map(|(id, tag)| node_line(*id, tag)).collect::<Vec<_>>().join("\n");
    let messages = prompts.conversation(
        &prompts.select_layer,
        &[("query", query), ("layer", layer.plural()), ("entities", &listing)],
    );
    let raw = llm.send(&messages)?;
    let v = parse_or_repair(&raw, llm, prompts, budget)?;
    let ids = id_list(&v, "ids").ok_or_else(|| ErrorKind::Selection(format!("no id list in {raw:?}")))?;
    let known: BTreeSet<NodeId> = entities.iter().map(|(id, _)| *id).collect();
    let kept = keep_known(ids, &known, layer.plural());
    // locations are optional below a room, so an empty pick there is valid
    if kept.is_empty() && layer != NodeKind::Location {
        return Err(ErrorKind::Selection(format!("no {} selected", layer.plural())));
    }
    Ok(kept)
}

/// Entities of one layer related to the query, as `(id, tag)` candidates.
pub fn select_related(
    entities: &[(NodeId, String)],
    layer: NodeKind,
    query: &str,
    llm: &dyn ChatClient,
    prompts: &PromptSet,
) -> Result<Vec<NodeId>, ReasoningError> {
    select_related_inner(entities, layer, query, llm, prompts, &RepairBudget::new(1))
        .map_err(|k| ReasoningError::new(&Stage::SelectLayer(layer), k))
}

fn select_targets_inner(
    group: &[ObjectRef],
    query: &str,
    llm: &dyn ChatClient,
    prompts: &PromptSet,
    budget: &RepairBudget,
) -> Result<(Vec<NodeId>, Vec<NodeId>), ErrorKind> {
    if group.is_empty() {
        return Err(ErrorKind::Selection("empty object group".into()));
    }
    let listing = group.iter().map(crate::edges::object_line).collect::<Vec<_>>().join("\n");
    let messages = prompts.conversation(&prompts.select_targets, &[("query", query), ("entities", &listing)]);
    let raw = llm.send(&messages)?;
    let v = parse_or_repair(&raw, llm, prompts, budget)?;
    let bad = || ErrorKind::Selection(format!("expected target_ids and anchor_ids in {raw:?}"));
    if !v.is_object() {
        return Err(bad());
    }
    let targets = id_list(&v, "target_ids").ok_or_else(bad)?;
    let anchors = match v.get("anchor_ids") {
        None | Some(Value::Null) => Vec::new(),
        Some(_) => id_list(&v, "anchor_ids").ok_or_else(bad)?,
    };
    let known: BTreeSet<NodeId> = group.iter().map(|o| o.id).collect();
    let targets = keep_known(targets, &known, "object");
    let anchors: Vec<NodeId> = keep_known(anchors, &known, "object").into_iter().filter(|a| !targets.contains(a)).collect();
    if targets.is_empty() {
        return Err(ErrorKind::Selection("no targets selected".into()));
    }
    Ok((targets, anchors))
}

/// Targets and anchors of one object group. An id listed as both stays a target.
pub fn select_targets_anchors(
    group: &[ObjectRef],
    query: &str,
    llm: &dyn ChatClient,
    prompts: &PromptSet,
) -> Result<(Vec<NodeId>, Vec<NodeId>), ReasoningError> {
    select_targets_inner(group, query, llm, prompts, &RepairBudget::new(1))
        .map_err(|k| ReasoningError::new(&Stage::SelectTargets(0), k))
}

fn render_groups(groups: &[EnrichedGroup], templates: &EdgeTemplates) -> String {
    groups
        .iter()
        .enumerate()
        .map(|(k, g)| format!("Region {}: {} (room {})\n{}", k + 1, g.room_tag, g.room_id, g.subgraph.to_text(templates)))
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn ground_inner(
    query: &str,
    groups: &[EnrichedGroup],
    llm: &dyn ChatClient,
    cfg: &ReasoningConfig,
    budget: &RepairBudget,
) -> Result<GroundingResult, ErrorKind> {
    if groups.is_empty() {
        return Err(ErrorKind::Grounding("no object groups to ground in".into()));
    }
    let text = render_groups(groups, &cfg.edge_templates);
    let messages = cfg.prompts.conversation(&cfg.prompts.ground, &[("query", query), ("groups", &text)]);
    let raw = llm.send(&messages)?;
    let v = parse_or_repair(&raw, llm, &cfg.prompts, budget)?;
    let id = v
        .get("object_id")
        .and_then(Value::as_u64)
        .and_then(|n| NodeId::try_from(n).ok())
        .ok_or_else(|| ErrorKind::Grounding(format!("no integer object_id in {raw:?}")))?;
    let obj = groups
        .iter()
        .flat_map(|g| g.subgraph.targets.iter().chain(&g.subgraph.anchors))
        .find(|o| o.id == id)
        .ok_or_else(|| ErrorKind::Grounding(format!("object_id {id} is not among the candidates")))?;
    let field = |k: &str| v.get(k).and_then(Value::as_str).unwrap_or_default().to_owned();
    Ok(GroundingResult {
        object_id: id,
        bbox: obj.bbox,
        reasoning: field("reasoning"),
        explanation: field("explanation"),
        raw_response: raw,
    })
}

/// Final grounding call over the enriched groups.
pub fn ground(
    query: &str,
    groups: &[EnrichedGroup],
    llm: &dyn ChatClient,
    cfg: &ReasoningConfig,
) -> Result<GroundingResult, ReasoningError> {
    ground_inner(query, groups, llm, cfg, &RepairBudget::new(1)).map_err(|k| ReasoningError::new(&Stage::Ground, k))
}

fn room_viewpoint(graph: &SceneGraph, room: NodeId) -> [f64; 2] {
    let r = &graph.rooms[&room];
    r.mask.centroid().unwrap_or_else(|| {
        let c = r.bbox.center();
        [c[0], c[1]]
    })
}

/// Full query pipeline. Every client call is appended to `log` under its
/// stage name. One repair call is allowed per query.
pub fn run_pipeline(
    graph: &SceneGraph,
    query: &str,
    llm: &dyn ChatClient,
    log: &CallLog,
    cfg: &ReasoningConfig,
) -> Result<GroundingOutcome, ReasoningError> {
    let start_calls = log.len();
    let budget = RepairBudget::new(1);
    let prompts = &cfg.prompts;
    if graph.objects.is_empty() {
        return Err(ReasoningError::new(&Stage::Ground, ErrorKind::EmptyGraph));
    }
    let mut trace = Trace::default();

    let layer = |kind: NodeKind, entities: Vec<(NodeId, String)>| -> Result<Vec<NodeId>, ReasoningError> {
        let stage = Stage::SelectLayer(kind);
        let client = Logged::new(llm, log, stage.to_string());
        select_related_inner(&entities, kind, query, &client, prompts, &budget).map_err(|k| ReasoningError::new(&stage, k))
    };

    let floors = layer(NodeKind::Floor, graph.floors.values().map(|f| (f.id, f.tag.clone())).collect())?;
    let rooms = layer(
        NodeKind::Room,
        graph.rooms.values().filter(|r| floors.contains(&r.floor_index)).map(|r| (r.id, r.tag.clone())).collect(),
    )?;
    let loc_candidates: Vec<(NodeId, String)> =
        graph.locations.values().filter(|l| rooms.contains(&l.room_id)).map(|l| (l.id, l.tag.clone())).collect();
    let locations = if loc_candidates.is_empty() { Vec::new() } else { layer(NodeKind::Location, loc_candidates)? };
    trace.floors = floors;
    trace.rooms = rooms.clone();
    trace.locations = locations.clone();

    let mut groups = Vec::new();
    let mut last_err = None;
    for &room in &rooms {
        let members: Vec<ObjectRef> = graph
            .objects
            .values()
            .filter(|o| o.room_id == Some(room) && o.location_id.is_none_or(|l| locations.contains(&l)))
            .map(|o| ObjectRef {
                id: o.id,
                tag: o.primary_tag.clone(),
                bbox: o.bbox,
            })
            .collect();
        if members.is_empty() {
            continue;
        }
        let stage = Stage::SelectTargets(room);
        let client = Logged::new(llm, log, stage.to_string());
        let (targets, anchors) = match select_targets_inner(&members, query, &client, prompts, &budget) {
            Ok(sel) => sel,
            Err(ErrorKind::Selection(msg)) => {
                log::info!("room {room}: {msg}; group dropped");
                last_err = Some(ReasoningError::new(&stage, ErrorKind::Selection(msg)));
                continue;
            }
            Err(k) => return Err(ReasoningError::new(&stage, k)),
        };
        let subgraph = enrich_subgraph_with(&members, &targets, &anchors, room_viewpoint(graph, room), &cfg.edge_templates)
            .map_err(|e| ReasoningError::new(&stage, e))?;
        trace.pairs_evaluated += subgraph.pairs_evaluated;
        trace.groups.push(GroupTrace {
            room_id: room,
            target_ids: targets,
            anchor_ids: anchors,
            pairs_evaluated: subgraph.pairs_evaluated,
        });
        groups.push(EnrichedGroup {
            room_id: room,
            room_tag: graph.rooms[&room].tag.clone(),
            subgraph,
        });
    }
    if groups.is_empty() {
        return Err(last_err.unwrap_or_else(|| {
            ReasoningError::new(
                &Stage::SelectLayer(NodeKind::Location),
                ErrorKind::Selection("no objects under the selected rooms and locations".into()),
            )
        }));
    }
    let client = Logged::new(llm, log, Stage::Ground.to_string());
    let result = ground_inner(query, &groups, &client, cfg, &budget).map_err(|k| ReasoningError::new(&Stage::Ground, k))?;
    trace.calls = log.len() - start_calls;
    Ok(GroundingOutcome { result, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build::tests::{floor, object, room};
    use crate::graph::{build_graph, GraphInputs};
    use crate::llm::{ChatMessage, LlmError};
    use std::sync::Mutex;

    /// Answers by prompt type, from a fixed queue per stage keyword.
    struct Rules {
        layer: Mutex<Vec<String>>,
        targets: Mutex<Vec<String>>,
        ground: Mutex<Vec<String>>,
        repair: Mutex<Vec<String>>,
    }

    fn q(v: &[&str]) -> Mutex<Vec<String>> {
        Mutex::new(v.iter().rev().map(|s| s.to_string()).collect())
    }

    impl ChatClient for Rules {
        fn send(&self, m: &[ChatMessage]) -> Result<String, LlmError> {
            let u = &m.last().unwrap().content;
            let queue = if u.contains("\"ids\"") {
                &self.layer
            } else if u.contains("target_ids") {
                &self.targets
            } else if u.contains("\"object_id\"") {
                &self.ground
            } else {
                &self.repair
            };
            queue.lock().unwrap().pop().ok_or(LlmError::NotConfigured("exhausted".into()))
        }
    }

    fn scene() -> SceneGraph {
        build_graph(GraphInputs {
            floors: vec![floor()],
            rooms: vec![room(0, 0, 20, "kitchen"), room(1, 20, 40, "bedroom")],
            objects: vec![
                object(0, [0.5, 1.0, 0.5], "chair"),
                object(1, [1.5, 1.0, 0.5], "table"),
                object(2, [3.0, 1.0, 0.5], "bed"),
                object(3, [3.5, 1.0, 0.5], "chair"),
            ],
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn pipeline_grounds_and_logs_each_stage() {
        let g = scene();
        let llm = Rules {
            layer: q(&[r#"{"ids":[0]}"#, r#"{"ids":[0, 1, 7]}"#]),
            targets: q(&[r#"{"target_ids":[0],"anchor_ids":[1]}"#, r#"{"target_ids":[3,2],"anchor_ids":[2]}"#]),
            ground: q(&[r#"{"reasoning":"r","explanation":"e","object_id":3}"#]),
            repair: q(&[]),
        };
        let log = CallLog::new();
        let out = run_pipeline(&g, "the chair by the bed", &llm, &log, &ReasoningConfig::default()).unwrap();
        assert_eq!(out.result.object_id, 3);
        assert_eq!(out.result.bbox, g.objects[&3].bbox);
        assert_eq!(out.trace.rooms, vec![0, 1]);
        assert_eq!(out.trace.groups[1].target_ids, vec![2, 3]);
        assert!(out.trace.groups[1].anchor_ids.is_empty());
        // 1 target x 1 anchor in room 0, none in room 1
        assert_eq!(out.trace.pairs_evaluated, 1);
        let stages: Vec<String> = log.records().into_iter().map(|r| r.stage).collect();
        assert_eq!(
            stages,
            ["select_floors", "select_rooms", "select_targets:room_0", "select_targets:room_1", "ground"]
        );
        assert_eq!(out.trace.calls, 5);
    }

    #[test]
    fn malformed_grounding_is_repaired_once() {
        let g = scene();
        let llm = Rules {
            layer: q(&[r#"{"ids":[0]}"#, r#"[1]"#]),
            targets: q(&[r#"{"target_ids":[2]}"#]),
            ground: q(&["object_id: 2, oops"]),
            repair: q(&[r#"{"object_id": 2}"#]),
        };
        let log = CallLog::new();
        let out = run_pipeline(&g, "the bed", &llm, &log, &ReasoningConfig::default()).unwrap();
        assert_eq!(out.result.object_id, 2);
        assert_eq!(out.result.reasoning, "");
        assert_eq!(log.len(), 5);
    }

    #[test]
    fn second_malformed_response_exhausts_budget() {
        let g = scene();
        let llm = Rules {
            layer: q(&["not json", r#"{"ids":[0]}"#]),
            targets: q(&["also not json"]),
            ground: q(&[]),
            repair: q(&[r#"{"ids":[0]}"#]),
        };
        let log = CallLog::new();
        let err = run_pipeline(&g, "the bed", &llm, &log, &ReasoningConfig::default()).unwrap_err();
        assert_eq!(err.stage, "select_targets:room_0");
        assert!(matches!(err.kind, ErrorKind::RepairFailed { .. }), "{err}");
        // floors, repair, rooms, targets; no second repair
        assert_eq!(log.len(), 4);
    }

    #[test]
    fn grounding_outside_candidates_is_rejected() {
        let g = scene();
        let llm = Rules {
            layer: q(&[r#"{"ids":[0]}"#, r#"{"ids":[1]}"#]),
            targets: q(&[r#"{"target_ids":[2]}"#]),
            ground: q(&[r#"{"object_id": 0}"#]),
            repair: q(&[]),
        };
        let err = run_pipeline(&g, "x", &llm, &CallLog::new(), &ReasoningConfig::default()).unwrap_err();
        assert_eq!(err.stage, "ground");
        assert!(matches!(err.kind, ErrorKind::Grounding(_)));
    }

    #[test]
    fn unknown_only_selection_is_an_error() {
        let g = scene();
        let llm = Rules { layer: q(&[r#"{"ids":[9]}"#]), targets: q(&[]), ground: q(&[]), repair: q(&[]) };
        let err = run_pipeline(&g, "x", &llm, &CallLog::new(), &ReasoningConfig::default()).unwrap_err();
        assert_eq!(err.stage, "select_floors");
        assert!(matches!(err.kind, ErrorKind::Selection(_)));
    }

    #[test]
    fn groups_without_targets_are_dropped() {
        let g = scene();
        let llm = Rules {
            layer: q(&[r#"{"ids":[0]}"#, r#"{"ids":[0,1]}"#]),
            targets: q(&[r#"{"target_ids":[],"anchor_ids":[1]}"#, r#"{"target_ids":[2],"anchor_ids":[3]}"#]),
            ground: q(&[r#"{"object_id": 2}"#]),
            repair: q(&[]),
        };
        let out = run_pipeline(&g, "x", &llm, &CallLog::new(), &ReasoningConfig::default()).unwrap();
        assert_eq!(out.trace.groups.len(), 1);
        assert_eq!(out.trace.groups[0].room_id, 1);
    }
}
