//! The hierarchical scene graph: building, floors, rooms, locations and
//! objects joined by boolean containment edges.

pub(crate) mod build;
mod persist;
mod text;

pub use build::{build_graph, GraphInputs};
pub use persist::{
    cloud_dir_for, deserialize, load_graph, save_graph, serialize, CloudResolver, DirResolver, PersistError, SerializedGraph,
    SCHEMA,
};
pub use text::{node_line, textualize_layer};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BinaryMask, Box3D, GridFrame, PointCloud, Polygon2D};

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Building,
    Floor,
    Room,
    Location,
    Object,
}

impl NodeKind {
    pub fn plural(self) -> &'static str {
        match self {
            NodeKind::Building => "buildings",
            NodeKind::Floor => "floors",
            NodeKind::Room => "rooms",
            NodeKind::Location => "locations",
            NodeKind::Object => "objects",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingNode {
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloorNode {
    pub id: NodeId,
    pub tag: String,
    pub z_low: f64,
    pub z_high: f64,
    /// Frame shared by every raster on this floor.
    pub frame: GridFrame,
    /// Observed BEV cells.
    pub mask: BinaryMask,
    pub cloud: PointCloud,
    pub bbox: Box3D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomNode {
    pub id: NodeId,
    pub floor_index: NodeId,
    pub mask: BinaryMask,
    pub cloud: PointCloud,
    pub bbox: Box3D,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationNode {
    pub id: NodeId,
    pub room_id: NodeId,
    pub polygon: Polygon2D,
    pub mask: BinaryMask,
    pub cloud: PointCloud,
    pub bbox: Box3D,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectNode {
    pub id: NodeId,
    pub cloud: PointCloud,
    pub bbox: Box3D,
    /// Multiview tags with observation counts.
    pub tags: BTreeMap<String, u32>,
    pub primary_tag: String,
    pub room_id: Option<NodeId>,
    pub location_id: Option<NodeId>,
}

impl ObjectNode {
    /// Most observed tag; ties go to the lexicographically first.
    pub fn modal_tag(tags: &BTreeMap<String, u32>) -> String {
        let mut best: Option<(&String, u32)> = None;
        for (t, &n) in tags {
            if best.is_none_or(|(_, m)| n > m) {
                best = Some((t, n));
            }
        }
        best.map(|(t, _)| t.clone()).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InterEdge {
    pub parent_kind: NodeKind,
    pub parent_id: NodeId,
    pub child_kind: NodeKind,
    pub child_id: NodeId,
}

impl InterEdge {
    pub fn new(parent_kind: NodeKind, parent_id: NodeId, child_kind: NodeKind, child_id: NodeId) -> Self {
        Self {
            parent_kind,
            parent_id,
            child_kind,
            child_id,
        }
    }
}

/// Building root id in edge tuples.
pub const BUILDING_ID: NodeId = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    pub building: BuildingNode,
    pub floors: BTreeMap<NodeId, FloorNode>,
    pub rooms: BTreeMap<NodeId, RoomNode>,
    pub locations: BTreeMap<NodeId, LocationNode>,
    pub objects: BTreeMap<NodeId, ObjectNode>,
    pub inter_edges: BTreeSet<InterEdge>,
    /// Effective build configuration, echoed for provenance.
    pub config: serde_json::Value,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("scene has no floors")]
    EmptyHierarchy,
    #[error("floor has no rooms to attach objects to")]
    NoRooms,
    #[error("inconsistent layers: {0}")]
    Inconsistent(String),
}

impl SceneGraph {
    pub fn children(&self, kind: NodeKind, id: NodeId, child_kind: NodeKind) -> Vec<NodeId> {
        self.inter_edges
            .iter()
            .filter(|e| e.parent_kind == kind && e.parent_id == id && e.child_kind == child_kind)
            .map(|e| e.child_id)
            .collect()
    }

    pub fn parent(&self, kind: NodeKind, id: NodeId, parent_kind: NodeKind) -> Option<NodeId> {
        self.inter_edges
            .iter()
            .find(|e| e.child_kind == kind && e.child_id == id && e.parent_kind == parent_kind)
            .map(|e| e.parent_id)
    }

    pub fn edge_count(&self, parent_kind: NodeKind, child_kind: NodeKind) -> usize {
        self.inter_edges
            .iter()
            .filter(|e| e.parent_kind == parent_kind && e.child_kind == child_kind)
            .count()
    }

    pub fn object_bbox(&self, id: NodeId) -> Option<Box3D> {
        self.objects.get(&id).map(|o| o.bbox)
    }

    /// Checks the containment invariants; returns the first violation.
    pub fn validate(&self) -> Result<(), GraphError> {
        use NodeKind::*;
        if self.floors.is_empty() {
            return Err(GraphError::EmptyHierarchy);
        }
        let bad = |m: String| Err(GraphError::Inconsistent(m));
        for &f in self.floors.keys() {
            if self.parent(Floor, f, Building) != Some(BUILDING_ID) {
                return bad(format!("floor {f} lacks a building edge"));
            }
        }
        for r in self.rooms.values() {
            if self.parent(Room, r.id, Floor) != Some(r.floor_index) || !self.floors.contains_key(&r.floor_index) {
                return bad(format!("room {} lacks its floor edge", r.id));
            }
        }
        for l in self.locations.values() {
            if self.parent(Location, l.id, Room) != Some(l.room_id) || !self.rooms.contains_key(&l.room_id) {
                return bad(format!("location {} lacks its room edge", l.id));
            }
        }
        for o in self.objects.values() {
            let rooms: Vec<_> = self.inter_edges.iter().filter(|e| e.child_kind == Object && e.child_id == o.id && e.parent_kind == Room).collect();
            let locs: Vec<_> = self.inter_edges.iter().filter(|e| e.child_kind == Object && e.child_id == o.id && e.parent_kind == Location).collect();
            if rooms.len() != 1 || Some(rooms[0].parent_id) != o.room_id {
                return bad(format!("object {} must have exactly one room edge", o.id));
            }
            if locs.len() > 1 || locs.first().map(|e| e.parent_id) != o.location_id {
                return bad(format!("object {} has inconsistent location edges", o.id));
            }
            if let Some(l) = o.location_id {
                if self.locations.get(&l).map(|l| l.room_id) != o.room_id {
                    return bad(format!("object {} location is outside its room", o.id));
                }
            }
        }
        Ok(())
    }
}
