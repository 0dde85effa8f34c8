//! Graph construction from a scene manifest: floors, rooms, objects,
//! locations, containment edges, then layer tags.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::floors::{floor_tag, segment_floors, FloorSlab};
use crate::geometry::io::load_cloud;
use crate::geometry::{BinaryMask, GridFrame, PointCloud};
use crate::graph::{build_graph, FloorNode, GraphInputs, LocationNode, NodeId, NodeKind, ObjectNode, RoomNode, SceneGraph};
use crate::llm::{CallLog, ChatClient, Logged};
use crate::locations::{assign_location_room, assign_location_tag, detect_locations_geometric, ingest_location_masks, mask_polygon};
use crate::objects::{aggregate_objects, backproject_depth, frame_fragments, load_depth_png, load_frame_detections};
use crate::rooms::{assign_room_tag, segment_rooms};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub frame_id: u32,
    /// Kept for reference; colour is not used by the pipeline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rgb_path: Option<String>,
    pub depth_path: String,
    pub detections_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskEntry {
    pub floor: usize,
    pub path: String,
}

/// Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud_path: Option<String>,
    pub frames: Vec<FrameEntry>,
    /// Precomputed location masks per floor; floors without one use the
    /// geometric detector.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub location_masks: Vec<MaskEntry>,
}

#[derive(Debug, Error)]
pub enum BuildError {
    /// Missing or malformed input files.
    #[error("{stage}: {msg}")]
    Input { stage: &'static str, msg: String },
    #[error("{stage}: {msg}")]
    Stage { stage: &'static str, msg: String },
}

impl BuildError {
    pub fn is_input(&self) -> bool {
        matches!(self, BuildError::Input { .. })
    }
}

fn input(stage: &'static str) -> impl Fn(String) -> BuildError {
    move |msg| BuildError::Input { stage, msg }
}

fn stage_err(stage: &'static str) -> impl Fn(String) -> BuildError {
    move |msg| BuildError::Stage { stage, msg }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub stage: String,
    pub elapsed_ms: u128,
    pub output: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildLog {
    pub stages: Vec<StageLog>,
    pub fragments: usize,
    pub cloud_points: usize,
}

impl BuildLog {
    fn record(&mut self, stage: &str, start: Instant, output: usize) {
        log::info!("{stage}: {output} in {} ms", start.elapsed().as_millis());
        self.stages.push(StageLog {
            stage: stage.into(),
            elapsed_ms: start.elapsed().as_millis(),
            output,
        });
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest, BuildError> {
    let text = std::fs::read_to_string(path).map_err(|e| BuildError::Input {
        stage: "manifest",
        msg: format!("{}: {e}", path.display()),
    })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| BuildError::Input {
        stage: "manifest",
        msg: format!("{}: at {}: {}", path.display(), e.path(), e.inner()),
    })
}

/// Builds the graph for `manifest`, resolving its paths against `base`.
/// `threads` caps the number of floors segmented at once.
pub fn build_scene_graph(
    manifest: &Manifest,
    base: &Path,
    cfg: &PipelineConfig,
    llm: &dyn ChatClient,
    calls: &CallLog,
    threads: usize,
) -> Result<(SceneGraph, BuildLog), BuildError> {
    let mut blog = BuildLog::default();
    let resolve = |p: &str| -> PathBuf { base.join(p) };

    // Frames are loaded first so that a bad frame fails before any compute.
    let t = Instant::now();
    let mut frames = Vec::with_capacity(manifest.frames.len());
    for f in &manifest.frames {
        let det = load_frame_detections(&resolve(&f.detections_path))
            .map_err(|e| input("objects")(format!("frame {}: {e}", f.frame_id)))?;
        let depth = load_depth_png(&resolve(&f.depth_path)).map_err(|e| input("objects")(format!("frame {}: {e}", f.frame_id)))?;
        if det.frame_id != f.frame_id {
            return Err(input("objects")(format!("frame {}: detections file has frame_id {}", f.frame_id, det.frame_id)));
        }
        frames.push((det, depth));
    }

    let cloud = match &manifest.cloud_path {
        Some(p) => load_cloud(&resolve(p)).map_err(|e| input("cloud")(format!("{p}: {e}")))?,
        None => {
            let mut pts = Vec::new();
            for (det, depth) in &frames {
                det.validate().map_err(|e| input("cloud")(e.to_string()))?;
                pts.extend(backproject_depth(depth, &det.intrinsics, &det.pose, det.depth_scale, cfg.depth_stride.max(1)));
            }
            PointCloud::new(pts).map_err(|e| stage_err("cloud")(e.to_string()))?
        }
    };
    blog.cloud_points = cloud.len();
    blog.record("load", t, cloud.len());

    let t = Instant::now();
    let slabs = segment_floors(&cloud, &cfg.floors).map_err(|e| stage_err("floors")(e.to_string()))?;
    blog.record("floors", t, slabs.len());

    let t = Instant::now();
    let mpp = cfg.rooms.meters_per_pixel;
    let mut frames_per_floor = Vec::new();
    for s in &slabs {
        frames_per_floor.push(GridFrame::covering(&s.cloud, mpp).map_err(|e| stage_err("rooms")(format!("floor {}: {e}", s.index)))?);
    }
    let per_floor = segment_all(&slabs, &frames_per_floor, cfg, threads)?;
    let mut rooms: Vec<RoomNode> = Vec::new();
    for floor_rooms in per_floor {
        for mut r in floor_rooms {
            r.id = rooms.len() as NodeId;
            rooms.push(r);
        }
    }
    blog.record("rooms", t, rooms.len());

    let t = Instant::now();
    let mut fragments = Vec::new();
    for (det, depth) in &frames {
        fragments.extend(frame_fragments(det, depth, &cfg.ingest).map_err(|e| input("objects")(e.to_string()))?);
    }
    blog.fragments = fragments.len();
    let objects = aggregate_objects(&fragments, &cfg.aggregate);
    blog.record("objects", t, objects.len());

    let t = Instant::now();
    let mut locations = Vec::new();
    for (slab, frame) in slabs.iter().zip(&frames_per_floor) {
        let floor_rooms: Vec<&RoomNode> = rooms.iter().filter(|r| r.floor_index as usize == slab.index).collect();
        let mask_file = manifest.location_masks.iter().find(|m| m.floor == slab.index);
        floor_locations(slab, *frame, &floor_rooms, &objects, mask_file.map(|m| resolve(&m.path)).as_deref(), cfg, &mut locations)?;
    }
    blog.record("locations", t, locations.len());

    let t = Instant::now();
    let floors: Vec<FloorNode> = slabs
        .iter()
        .zip(&frames_per_floor)
        .map(|(s, f)| {
            let mut mask = BinaryMask::new(*f);
            for p in s.cloud.points() {
                if let Some((r, c)) = f.cell_of(p[0], p[1]) {
                    mask.set(r, c, true);
                }
            }
            FloorNode {
                id: s.index as NodeId,
                tag: floor_tag(s.index),
                z_low: s.z_low,
                z_high: s.z_high,
                frame: *f,
                mask,
                bbox: s.cloud.bounding_box().expect("slab clouds are non-empty"),
                cloud: s.cloud.clone(),
            }
        })
        .collect();
    let mut graph = build_graph(GraphInputs {
        building_tag: cfg.building_tag.clone(),
        floors,
        rooms,
        locations,
        objects,
        config: cfg.to_value(),
    })
    .map_err(|e| stage_err("graph")(e.to_string()))?;
    blog.record("graph", t, graph.objects.len());

    let t = Instant::now();
    tag_layers(&mut graph, llm, calls, cfg);
    blog.record("tags", t, graph.rooms.len() + graph.locations.len());
    Ok((graph, blog))
}

fn segment_all(
    slabs: &[FloorSlab],
    frames: &[GridFrame],
    cfg: &PipelineConfig,
    threads: usize,
) -> Result<Vec<Vec<RoomNode>>, BuildError> {
    let run = |i: usize| {
        segment_rooms(&slabs[i], frames[i], &cfg.rooms).map_err(|e| stage_err("rooms")(format!("floor {}: {e}", slabs[i].index)))
    };
    let threads = threads.max(1);
    let mut out = Vec::with_capacity(slabs.len());
    if threads == 1 || slabs.len() < 2 {
        for i in 0..slabs.len() {
            out.push(run(i)?);
        }
        return Ok(out);
    }
    let idx: Vec<usize> = (0..slabs.len()).collect();
    for chunk in idx.chunks(threads) {
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|&i| s.spawn(move || run(i))).collect();
            handles.into_iter().map(|h| h.join().expect("room worker panicked")).collect()
        });
        for r in results {
            out.push(r?);
        }
    }
    Ok(out)
}

/// Object points whose box center falls inside the slab, labelled by object.
fn slab_object_cloud(slab: &FloorSlab, objects: &[ObjectNode]) -> PointCloud {
    let mut pts = Vec::new();
    let mut ids = Vec::new();
    for o in objects {
        let z = o.bbox.center()[2];
        if z >= slab.z_low && z < slab.z_high {
            pts.extend_from_slice(o.cloud.points());
            ids.extend(std::iter::repeat_n(o.id, o.cloud.len()));
        }
    }
    PointCloud::with_object_ids(pts, ids).expect("lengths agree")
}

fn floor_locations(
    slab: &FloorSlab,
    frame: GridFrame,
    rooms: &[&RoomNode],
    objects: &[ObjectNode],
    mask_path: Option<&Path>,
    cfg: &PipelineConfig,
    out: &mut Vec<LocationNode>,
) -> Result<(), BuildError> {
    let obj_cloud = slab_object_cloud(slab, objects);
    let mut found = Vec::new();
    match mask_path {
        Some(p) => {
            let masks = ingest_location_masks(p, slab.index, frame).map_err(|e| input("locations")(e.to_string()))?;
            for mask in masks {
                let polygon = match mask_polygon(&mask, cfg.locations.alpha) {
                    Ok(poly) => poly,
                    Err(e) => {
                        log::warn!("floor {}: location mask skipped: {e}", slab.index);
                        continue;
                    }
                };
                let cloud = obj_cloud.filter(|_, q| mask.contains_xy(q[0], q[1]));
                found.push((polygon, mask, cloud));
            }
        }
        None => {
            if obj_cloud.is_empty() {
                return Ok(());
            }
            let detected = detect_locations_geometric(&obj_cloud, &cfg.locations, Some((slab.z_low, slab.z_high)))
                .map_err(|e| stage_err("locations")(format!("floor {}: {e}", slab.index)))?;
            for d in detected {
                let mask = d.polygon.rasterize(frame);
                found.push((d.polygon, mask, d.cloud));
            }
        }
    }
    for (polygon, mask, cloud) in found {
        if mask.count() == 0 || cloud.is_empty() {
            log::warn!("floor {}: empty location skipped", slab.index);
            continue;
        }
        let Some(room_id) = assign_location_room(&mask, rooms.iter().copied()) else {
            log::warn!("floor {}: location without a room skipped", slab.index);
            continue;
        };
        out.push(LocationNode {
            id: out.len() as NodeId,
            room_id,
            polygon,
            mask,
            bbox: cloud.bounding_box().expect("non-empty"),
            cloud,
            tag: String::new(),
        });
    }
    Ok(())
}

/// Locations are tagged from their objects, then rooms from their objects and
/// location tags.
pub fn tag_layers(graph: &mut SceneGraph, llm: &dyn ChatClient, calls: &CallLog, cfg: &PipelineConfig) {
    let prompts = &cfg.reasoning.prompts;
    let loc_ids: Vec<NodeId> = graph.locations.keys().copied().collect();
    for id in loc_ids {
        let tags: Vec<String> = graph
            .children(NodeKind::Location, id, NodeKind::Object)
            .iter()
            .map(|o| graph.objects[o].primary_tag.clone())
            .collect();
        let client = Logged::new(llm, calls, format!("tag_location:{id}"));
        let tag = assign_location_tag(&tags, &client, prompts);
        graph.locations.get_mut(&id).expect("listed").tag = tag;
    }
    let room_ids: Vec<NodeId> = graph.rooms.keys().copied().collect();
    for id in room_ids {
        let mut contents: Vec<String> = graph
            .children(NodeKind::Room, id, NodeKind::Object)
            .iter()
            .map(|o| graph.objects[o].primary_tag.clone())
            .collect();
        contents.extend(graph.children(NodeKind::Room, id, NodeKind::Location).iter().map(|l| graph.locations[l].tag.clone()));
        let client = Logged::new(llm, calls, format!("tag_room:{id}"));
        let tag = assign_room_tag(&contents, &client, prompts);
        graph.rooms.get_mut(&id).expect("listed").tag = tag;
    }
}
