use std::collections::{BTreeMap, BTreeSet};

use super::{
    BuildingNode, FloorNode, GraphError, InterEdge, LocationNode, NodeId, NodeKind, ObjectNode, RoomNode, SceneGraph,
    BUILDING_ID,
};

/// Minimum share of an object's points inside a location polygon for E_LO.
pub const LOCATION_OVERLAP_MIN: f64 = 0.5;

#[derive(Debug, Clone, Default)]
pub struct GraphInputs {
    pub building_tag: String,
    pub floors: Vec<FloorNode>,
    pub rooms: Vec<RoomNode>,
    pub locations: Vec<LocationNode>,
    pub objects: Vec<ObjectNode>,
    pub config: serde_json::Value,
}

fn index<T>(items: Vec<T>, id: impl Fn(&T) -> NodeId, kind: &str) -> Result<BTreeMap<NodeId, T>, GraphError> {
    let mut out = BTreeMap::new();
    for item in items {
        let k = id(&item);
        if out.insert(k, item).is_some() {
            return Err(GraphError::Inconsistent(format!("duplicate {kind} id {k}")));
        }
    }
    Ok(out)
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

/// Room holding most of the object's points (within the room's floor
/// z-range), ties to the lower id; nearest room center when none holds any.
fn room_of(obj: &ObjectNode, rooms: &BTreeMap<NodeId, RoomNode>, floors: &BTreeMap<NodeId, FloorNode>) -> NodeId {
    let mut best: Option<(NodeId, usize)> = None;
    for r in rooms.values() {
        let f = &floors[&r.floor_index];
        let n = obj
            .cloud
            .points()
            .iter()
            .filter(|p| p[2] >= f.z_low && p[2] <= f.z_high && r.mask.contains_xy(p[0], p[1]))
            .count();
        if n > 0 && best.is_none_or(|(_, m)| n > m) {
            best = Some((r.id, n));
        }
    }
    if let Some((id, _)) = best {
        return id;
    }
    let c = obj.bbox.center();
    let mut nearest: Option<(NodeId, f64)> = None;
    for r in rooms.values() {
        let d = dist2(c, r.bbox.center());
        if nearest.is_none_or(|(_, m)| d < m) {
            nearest = Some((r.id, d));
        }
    }
    let id = nearest.expect("rooms non-empty").0;
    log::warn!("object {} ({}) lies in no room; attached to nearest room {id}", obj.id, obj.primary_tag);
    id
}

fn location_of(obj: &ObjectNode, room: NodeId, locations: &BTreeMap<NodeId, LocationNode>) -> Option<NodeId> {
    let total = obj.cloud.len();
    if total == 0 {
        return None;
    }
    let mut best: Option<(NodeId, usize)> = None;
    for l in locations.values().filter(|l| l.room_id == room) {
        let n = obj.cloud.points().iter().filter(|p| l.polygon.contains([p[0], p[1]])).count();
        if n as f64 >= LOCATION_OVERLAP_MIN * total as f64 && best.is_none_or(|(_, m)| n > m) {
            best = Some((l.id, n));
        }
    }
    best.map(|(id, _)| id)
}

/// Assembles the graph and computes every containment edge. Rooms and
/// locations carry their parent already; objects are placed here.
pub fn build_graph(inputs: GraphInputs) -> Result<SceneGraph, GraphError> {
    use NodeKind::*;
    if inputs.floors.is_empty() {
        return Err(GraphError::EmptyHierarchy);
    }
    let floors = index(inputs.floors, |f| f.id, "floor")?;
    let rooms = index(inputs.rooms, |r| r.id, "room")?;
    let locations = index(inputs.locations, |l| l.id, "location")?;
    let mut objects = index(inputs.objects, |o| o.id, "object")?;

    let mut edges = BTreeSet::new();
    for &f in floors.keys() {
        edges.insert(InterEdge::new(Building, BUILDING_ID, Floor, f));
    }
    for r in rooms.values() {
        if !floors.contains_key(&r.floor_index) {
            return Err(GraphError::Inconsistent(format!("room {} references missing floor {}", r.id, r.floor_index)));
        }
        edges.insert(InterEdge::new(Floor, r.floor_index, Room, r.id));
    }
    for l in locations.values() {
        if !rooms.contains_key(&l.room_id) {
            return Err(GraphError::Inconsistent(format!("location {} references missing room {}", l.id, l.room_id)));
        }
        edges.insert(InterEdge::new(Room, l.room_id, Location, l.id));
    }
    if !objects.is_empty() && rooms.is_empty() {
        return Err(GraphError::NoRooms);
    }
    for obj in objects.values_mut() {
        let room = room_of(obj, &rooms, &floors);
        let loc = location_of(obj, room, &locations);
        obj.room_id = Some(room);
        obj.location_id = loc;
        edges.insert(InterEdge::new(Room, room, Object, obj.id));
        if let Some(l) = loc {
            edges.insert(InterEdge::new(Location, l, Object, obj.id));
        }
    }
    let tag = if inputs.building_tag.is_empty() { "building".to_owned() } else { inputs.building_tag };
    let graph = SceneGraph {
        building: BuildingNode { tag },
        floors,
        rooms,
        locations,
        objects,
        inter_edges: edges,
        config: inputs.config,
    };
    graph.validate()?;
    Ok(graph)
}
