//! JSON persistence. Node clouds live in binary PLY sidecars referenced by
//! `cloud_ref`; masks are stored inline as run-length triples over the
//! floor's BEV frame. Floats are written in shortest round-trip form, so
//! every value survives bit-exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{
    BuildingNode, FloorNode, GraphError, InterEdge, LocationNode, NodeId, NodeKind, ObjectNode, RoomNode, SceneGraph,
};
use crate::geometry::io::{read_ply, write_ply};
use crate::geometry::rle::Rle;
use crate::geometry::{BinaryMask, Box3D, GridFrame, PointCloud, Polygon2D};

pub const SCHEMA: &str = "ovigo-hsg/1";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("parse error at {path} (line {line}, column {column}, byte offset {offset}): {msg}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        offset: usize,
        msg: String,
    },
    #[error("unsupported schema {0:?}, expected {SCHEMA:?}")]
    Schema(String),
    #[error("invalid {what}: {msg}")]
    Invalid { what: String, msg: String },
    #[error("cloud {cloud_ref}: {msg}")]
    Cloud { cloud_ref: String, msg: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

type Corners = [[f64; 3]; 2];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    schema: String,
    config: Value,
    building: BuildingDoc,
    floors: Vec<FloorDoc>,
    rooms: Vec<RoomDoc>,
    locations: Vec<LocationDoc>,
    objects: Vec<ObjectDoc>,
    edges: Vec<(NodeKind, NodeId, NodeKind, NodeId)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuildingDoc {
    tag: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FloorDoc {
    id: NodeId,
    tag: String,
    z_low: f64,
    z_high: f64,
    frame: GridFrame,
    bbox: Corners,
    cloud_ref: String,
    mask: Rle,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoomDoc {
    id: NodeId,
    floor_index: NodeId,
    tag: String,
    bbox: Corners,
    cloud_ref: String,
    mask: Rle,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LocationDoc {
    id: NodeId,
    room_id: NodeId,
    tag: String,
    polygon: Polygon2D,
    bbox: Corners,
    cloud_ref: String,
    mask: Rle,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    id: NodeId,
    primary_tag: String,
    tags: BTreeMap<String, u32>,
    room_id: Option<NodeId>,
    location_id: Option<NodeId>,
    bbox: Corners,
    cloud_ref: String,
}

/// Graph document plus the sidecar files it references.
#[derive(Debug, Clone, PartialEq)]
pub struct SerializedGraph {
    pub json: Vec<u8>,
    pub sidecars: BTreeMap<String, Vec<u8>>,
}

impl SerializedGraph {
    /// Writes the document to `path` and sidecars relative to its directory.
    pub fn write_to(&self, path: &Path) -> Result<(), PersistError> {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| PersistError::Io { path, source }
        };
        for (rel, bytes) in &self.sidecars {
            let p = dir.join(rel);
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent).map_err(io(parent))?;
            }
            std::fs::write(&p, bytes).map_err(io(&p))?;
        }
        std::fs::write(path, &self.json).map_err(io(path))
    }
}

pub trait CloudResolver {
    fn load(&self, cloud_ref: &str) -> Result<Vec<u8>, String>;
}

impl CloudResolver for BTreeMap<String, Vec<u8>> {
    fn load(&self, cloud_ref: &str) -> Result<Vec<u8>, String> {
        self.get(cloud_ref).cloned().ok_or_else(|| "missing sidecar".to_owned())
    }
}

/// Resolves references relative to a directory.
pub struct DirResolver(pub PathBuf);

impl CloudResolver for DirResolver {
    fn load(&self, cloud_ref: &str) -> Result<Vec<u8>, String> {
        std::fs::read(self.0.join(cloud_ref)).map_err(|e| e.to_string())
    }
}

fn corners(b: &Box3D) -> Corners {
    [b.min, b.max]
}

/// Serializes with sidecars named `<cloud_dir>/<kind>_<id>.ply`.
pub fn serialize(graph: &SceneGraph, cloud_dir: &str) -> SerializedGraph {
    let mut sidecars = BTreeMap::new();
    let mut sidecar = |kind: &str, id: NodeId, cloud: &PointCloud| {
        let name = format!("{cloud_dir}/{kind}_{id}.ply");
        sidecars.insert(name.clone(), write_ply(cloud));
        name
    };
    let doc = GraphDoc {
        schema: SCHEMA.to_owned(),
        config: graph.config.clone(),
        building: BuildingDoc {
            tag: graph.building.tag.clone(),
        },
        floors: graph
            .floors
            .values()
            .map(|f| FloorDoc {
                id: f.id,
                tag: f.tag.clone(),
                z_low: f.z_low,
                z_high: f.z_high,
                frame: f.frame,
                bbox: corners(&f.bbox),
                cloud_ref: sidecar("floor", f.id, &f.cloud),
                mask: Rle::encode(&f.mask.values),
            })
            .collect(),
        rooms: graph
            .rooms
            .values()
            .map(|r| RoomDoc {
                id: r.id,
                floor_index: r.floor_index,
                tag: r.tag.clone(),
                bbox: corners(&r.bbox),
                cloud_ref: sidecar("room", r.id, &r.cloud),
                mask: Rle::encode(&r.mask.values),
            })
            .collect(),
        locations: graph
            .locations
            .values()
            .map(|l| LocationDoc {
                id: l.id,
                room_id: l.room_id,
                tag: l.tag.clone(),
                polygon: l.polygon.clone(),
                bbox: corners(&l.bbox),
                cloud_ref: sidecar("location", l.id, &l.cloud),
                mask: Rle::encode(&l.mask.values),
            })
            .collect(),
        objects: graph
            .objects
            .values()
            .map(|o| ObjectDoc {
                id: o.id,
                primary_tag: o.primary_tag.clone(),
                tags: o.tags.clone(),
                room_id: o.room_id,
                location_id: o.location_id,
                bbox: corners(&o.bbox),
                cloud_ref: sidecar("object", o.id, &o.cloud),
            })
            .collect(),
        edges: graph
            .inter_edges
            .iter()
            .map(|e| (e.parent_kind, e.parent_id, e.child_kind, e.child_id))
            .collect(),
    };
    let mut json = serde_json::to_vec_pretty(&doc).expect("graph serializes");
    json.push(b'\n');
    SerializedGraph { json, sidecars }
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in bytes.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(bytes.len());
        }
        offset += l.len() + 1;
    }
    bytes.len()
}

fn invalid(what: impl Into<String>, msg: impl ToString) -> PersistError {
    PersistError::Invalid {
        what: what.into(),
        msg: msg.to_string(),
    }
}

fn bbox(what: &str, c: Corners) -> Result<Box3D, PersistError> {
    Box3D::new(c[0], c[1]).map_err(|e| invalid(format!("{what} bbox"), e))
}

fn mask(what: &str, frame: GridFrame, rle: &Rle) -> Result<BinaryMask, PersistError> {
    let values = rle.decode(frame.len()).map_err(|e| invalid(format!("{what} mask"), e))?;
    BinaryMask::from_values(frame, values).map_err(|e| invalid(format!("{what} mask"), e))
}

fn cloud(resolver: &dyn CloudResolver, cloud_ref: &str) -> Result<PointCloud, PersistError> {
    let bytes = resolver.load(cloud_ref).map_err(|msg| PersistError::Cloud {
        cloud_ref: cloud_ref.to_owned(),
        msg,
    })?;
    read_ply(&bytes).map_err(|e| PersistError::Cloud {
        cloud_ref: cloud_ref.to_owned(),
        msg: e.to_string(),
    })
}

pub fn deserialize(bytes: &[u8], resolver: &dyn CloudResolver) -> Result<SceneGraph, PersistError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let doc: GraphDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        PersistError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            offset: byte_offset(bytes, inner.line(), inner.column()),
            msg: inner.to_string(),
        }
    })?;
    if doc.schema != SCHEMA {
        return Err(PersistError::Schema(doc.schema));
    }
    let mut floors = BTreeMap::new();
    for f in doc.floors {
        let what = format!("floor {}", f.id);
        let node = FloorNode {
            id: f.id,
            tag: f.tag,
            z_low: f.z_low,
            z_high: f.z_high,
            frame: f.frame,
            mask: mask(&what, f.frame, &f.mask)?,
            cloud: cloud(resolver, &f.cloud_ref)?,
            bbox: bbox(&what, f.bbox)?,
        };
        if floors.insert(f.id, node).is_some() {
            return Err(invalid(what, "duplicate id"));
        }
    }
    let mut rooms = BTreeMap::new();
    for r in doc.rooms {
        let what = format!("room {}", r.id);
        let frame = floors
            .get(&r.floor_index)
            .map(|f: &FloorNode| f.frame)
            .ok_or_else(|| invalid(&what, format!("unknown floor {}", r.floor_index)))?;
        let node = RoomNode {
            id: r.id,
            floor_index: r.floor_index,
            mask: mask(&what, frame, &r.mask)?,
            cloud: cloud(resolver, &r.cloud_ref)?,
            bbox: bbox(&what, r.bbox)?,
            tag: r.tag,
        };
        if rooms.insert(r.id, node).is_some() {
            return Err(invalid(what, "duplicate id"));
        }
    }
    let mut locations = BTreeMap::new();
    for l in doc.locations {
        let what = format!("location {}", l.id);
        let frame = rooms
            .get(&l.room_id)
            .map(|r: &RoomNode| r.mask.frame)
            .ok_or_else(|| invalid(&what, format!("unknown room {}", l.room_id)))?;
        let node = LocationNode {
            id: l.id,
            room_id: l.room_id,
            polygon: l.polygon,
            mask: mask(&what, frame, &l.mask)?,
            cloud: cloud(resolver, &l.cloud_ref)?,
            bbox: bbox(&what, l.bbox)?,
            tag: l.tag,
        };
        if locations.insert(l.id, node).is_some() {
            return Err(invalid(what, "duplicate id"));
        }
    }
    let mut objects = BTreeMap::new();
    for o in doc.objects {
        let what = format!("object {}", o.id);
        if o.tags.values().any(|&n| n == 0) {
            return Err(invalid(&what, "tag count 0"));
        }
        let node = ObjectNode {
            id: o.id,
            cloud: cloud(resolver, &o.cloud_ref)?,
            bbox: bbox(&what, o.bbox)?,
            tags: o.tags,
            primary_tag: o.primary_tag,
            room_id: o.room_id,
            location_id: o.location_id,
        };
        if objects.insert(o.id, node).is_some() {
            return Err(invalid(what, "duplicate id"));
        }
    }
    let inter_edges: BTreeSet<InterEdge> = doc
        .edges
        .into_iter()
        .map(|(pk, pi, ck, ci)| InterEdge::new(pk, pi, ck, ci))
        .collect();
    let graph = SceneGraph {
        building: BuildingNode { tag: doc.building.tag },
        floors,
        rooms,
        locations,
        objects,
        inter_edges,
        config: doc.config,
    };
    graph.validate()?;
    Ok(graph)
}

/// Sidecar directory used next to a graph file: `<stem>.clouds`.
pub fn cloud_dir_for(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("graph");
    format!("{stem}.clouds")
}

pub fn save_graph(graph: &SceneGraph, path: &Path) -> Result<(), PersistError> {
    serialize(graph, &cloud_dir_for(path)).write_to(path)
}

pub fn load_graph(path: &Path) -> Result<SceneGraph, PersistError> {
    let bytes = std::fs::read(path).map_err(|source| PersistError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    deserialize(&bytes, &DirResolver(dir))
}
