//! Static exports: a bird's-eye PNG per floor and a DOT rendering of the
//! containment hierarchy.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use thiserror::Error;

use crate::geometry::{BinaryMask, GridFrame};
use crate::graph::{NodeId, NodeKind, SceneGraph, BUILDING_ID};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("graph has no floors to export")]
    EmptyGraph,
    #[error("unknown floor {0}")]
    UnknownFloor(NodeId),
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
const OBSERVED: Rgb<u8> = Rgb([225, 225, 225]);
const ROOM_EDGE: Rgb<u8> = Rgb([40, 40, 40]);
const LOCATION_EDGE: Rgb<u8> = Rgb([0, 170, 60]);
const OBJECT_EDGE: Rgb<u8> = Rgb([200, 40, 40]);

const PALETTE: [[u8; 3]; 8] = [
    [166, 206, 227],
    [178, 223, 138],
    [251, 154, 153],
    [253, 191, 111],
    [202, 178, 214],
    [255, 255, 153],
    [141, 211, 199],
    [217, 217, 217],
];

fn tint(c: [u8; 3]) -> Rgb<u8> {
    Rgb(c.map(|v| ((v as u16 + 255 * 2) / 3) as u8))
}

/// Image pixel of a metric point; +y points up in the picture.
fn to_px(frame: &GridFrame, scale: u32, x: f64, y: f64) -> (f64, f64) {
    let m = frame.meters_per_pixel / scale as f64;
    let u = (x - frame.origin_xy[0]) / m;
    let v = (frame.height * scale as usize) as f64 - (y - frame.origin_xy[1]) / m;
    (u, v)
}

fn put(img: &mut RgbImage, u: i64, v: i64, c: Rgb<u8>) {
    if u >= 0 && v >= 0 && (u as u32) < img.width() && (v as u32) < img.height() {
        img.put_pixel(u as u32, v as u32, c);
    }
}

fn line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), c: Rgb<u8>) {
    let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let u = a.0 + (b.0 - a.0) * t;
        let v = a.1 + (b.1 - a.1) * t;
        put(img, u.floor() as i64, v.floor() as i64, c);
    }
}

fn fill_mask(img: &mut RgbImage, mask: &BinaryMask, scale: u32, c: Rgb<u8>) {
    let f = mask.frame;
    for r in 0..f.height {
        for col in 0..f.width {
            if !mask.get(r, col) {
                continue;
            }
            for dv in 0..scale {
                for du in 0..scale {
                    let v = (f.height - 1 - r) as u32 * scale + dv;
                    img.put_pixel(col as u32 * scale + du, v, c);
                }
            }
        }
    }
}

/// Outlines a mask along cell edges that border an unset cell.
fn outline_mask(img: &mut RgbImage, mask: &BinaryMask, scale: u32, c: Rgb<u8>) {
    let f = mask.frame;
    let set = |r: i64, col: i64| r >= 0 && col >= 0 && (r as usize) < f.height && (col as usize) < f.width && mask.get(r as usize, col as usize);
    for r in 0..f.height as i64 {
        for col in 0..f.width as i64 {
            if !set(r, col) {
                continue;
            }
            if [(0, 1), (0, -1), (1, 0), (-1, 0)].iter().any(|&(dr, dc)| !set(r + dr, col + dc)) {
                let v0 = (f.height as i64 - 1 - r) * scale as i64;
                for d in 0..scale as i64 {
                    for e in 0..scale as i64 {
                        if d == 0 || e == 0 || d + 1 == scale as i64 || e + 1 == scale as i64 {
                            put(img, col * scale as i64 + d, v0 + e, c);
                        }
                    }
                }
            }
        }
    }
}

/// Renders one floor: observed cells, rooms filled and outlined, location
/// polygons in green and object footprints in red. `scale` image pixels
/// per grid cell.
pub fn bev_image(graph: &SceneGraph, floor: NodeId, scale: u32) -> Result<RgbImage, ExportError> {
    let fl = graph.floors.get(&floor).ok_or(ExportError::UnknownFloor(floor))?;
    let scale = scale.max(1);
    let f = fl.frame;
    let mut img = RgbImage::from_pixel(f.width as u32 * scale, f.height as u32 * scale, BACKGROUND);
    fill_mask(&mut img, &fl.mask, scale, OBSERVED);
    let rooms: Vec<_> = graph.rooms.values().filter(|r| r.floor_index == floor).collect();
    for (k, r) in rooms.iter().enumerate() {
        fill_mask(&mut img, &r.mask, scale, tint(PALETTE[k % PALETTE.len()]));
    }
    for r in &rooms {
        outline_mask(&mut img, &r.mask, scale, ROOM_EDGE);
    }
    let room_ids: Vec<NodeId> = rooms.iter().map(|r| r.id).collect();
    for o in graph.objects.values().filter(|o| o.room_id.is_some_and(|r| room_ids.contains(&r))) {
        let b = o.bbox;
        let corners = [[b.min[0], b.min[1]], [b.max[0], b.min[1]], [b.max[0], b.max[1]], [b.min[0], b.max[1]]];
        for i in 0..4 {
            let (p, q) = (corners[i], corners[(i + 1) % 4]);
            line(&mut img, to_px(&f, scale, p[0], p[1]), to_px(&f, scale, q[0], q[1]), OBJECT_EDGE);
        }
    }
    for l in graph.locations.values().filter(|l| room_ids.contains(&l.room_id)) {
        let vs = l.polygon.vertices();
        for i in 0..vs.len() {
            let (p, q) = (vs[i], vs[(i + 1) % vs.len()]);
            let (a, b) = (to_px(&f, scale, p[0], p[1]), to_px(&f, scale, q[0], q[1]));
            // two pixels wide so outlines stay visible at small scales
            line(&mut img, a, b, LOCATION_EDGE);
            line(&mut img, (a.0 + 1.0, a.1), (b.0 + 1.0, b.1), LOCATION_EDGE);
        }
    }
    Ok(img)
}

/// Writes `floor_<id>.png` for every floor into `dir`.
pub fn write_bev_pngs(graph: &SceneGraph, dir: &Path, scale: u32) -> Result<Vec<PathBuf>, ExportError> {
    if graph.floors.is_empty() {
        return Err(ExportError::EmptyGraph);
    }
    std::fs::create_dir_all(dir).map_err(|e| ExportError::Io {
        path: dir.to_path_buf(),
        msg: e.to_string(),
    })?;
    let mut out = Vec::new();
    for &id in graph.floors.keys() {
        let path = dir.join(format!("floor_{id}.png"));
        bev_image(graph, id, scale)?.save(&path).map_err(|e| ExportError::Io {
            path: path.clone(),
            msg: e.to_string(),
        })?;
        out.push(path);
    }
    Ok(out)
}

fn node_name(kind: NodeKind, id: NodeId) -> String {
    match kind {
        NodeKind::Building => "building".into(),
        NodeKind::Floor => format!("floor_{id}"),
        NodeKind::Room => format!("room_{id}"),
        NodeKind::Location => format!("location_{id}"),
        NodeKind::Object => format!("object_{id}"),
    }
}

fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// The hierarchy as a Graphviz digraph, one node per scene-graph node and
/// one edge per containment edge.
pub fn graph_dot(graph: &SceneGraph) -> Result<String, ExportError> {
    if graph.floors.is_empty() {
        return Err(ExportError::EmptyGraph);
    }
    let mut s = String::from("digraph scene {\n  rankdir=TB;\n  node [shape=box, fontsize=10];\n");
    let mut node = |kind: NodeKind, id: NodeId, label: String, color: &str| {
        let _ = writeln!(s, "  {} [label={}, color={}];", node_name(kind, id), quoted(&label), quoted(color));
    };
    node(NodeKind::Building, BUILDING_ID, graph.building.tag.clone(), "black");
    for f in graph.floors.values() {
        node(NodeKind::Floor, f.id, format!("{}: {}", f.id, f.tag), "gray40");
    }
    for r in graph.rooms.values() {
        node(NodeKind::Room, r.id, format!("{}: {}", r.id, r.tag), "blue");
    }
    for l in graph.locations.values() {
        node(NodeKind::Location, l.id, format!("{}: {}", l.id, l.tag), "darkgreen");
    }
    for o in graph.objects.values() {
        node(NodeKind::Object, o.id, format!("{}: {}", o.id, o.primary_tag), "red");
    }
    for e in &graph.inter_edges {
        let _ = writeln!(s, "  {} -> {};", node_name(e.parent_kind, e.parent_id), node_name(e.child_kind, e.child_id));
    }
    s.push_str("}\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Box3D, PointCloud, Polygon2D};
    use crate::graph::build::tests::{floor, frame, object, room};
    use crate::graph::{build_graph, GraphInputs, LocationNode};

    fn small_graph() -> SceneGraph {
        let poly = Polygon2D::new(vec![[0.5, 0.5], [1.5, 0.5], [1.5, 1.5], [0.5, 1.5]]).unwrap();
        let loc = LocationNode {
            id: 0,
            room_id: 0,
            mask: poly.rasterize(frame()),
            polygon: poly,
            cloud: PointCloud::empty(),
            bbox: Box3D::new([0.5, 0.5, 0.0], [1.5, 1.5, 1.0]).unwrap(),
            tag: "seating area".into(),
        };
        build_graph(GraphInputs {
            floors: vec![floor()],
            rooms: vec![room(0, 0, 20, "kitchen \"odd\""), room(1, 20, 40, "bedroom")],
            locations: vec![loc],
            objects: vec![object(0, [1.0, 1.0, 0.5], "chair"), object(1, [3.0, 1.0, 0.5], "bed")],
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn dot_declares_every_edge_endpoint() {
        let g = small_graph();
        let dot = graph_dot(&g).unwrap();
        assert!(dot.starts_with("digraph scene {") && dot.trim_end().ends_with('}'));
        assert!(dot.contains(r#"kitchen \"odd\""#));
        let declared: Vec<&str> = dot.lines().filter(|l| l.contains("[label=")).map(|l| l.trim().split(' ').next().unwrap()).collect();
        let edges: Vec<(&str, &str)> = dot
            .lines()
            .filter_map(|l| l.trim().strip_suffix(';')?.split_once(" -> "))
            .collect();
        assert_eq!(edges.len(), g.inter_edges.len());
        for (a, b) in edges {
            assert!(declared.contains(&a) && declared.contains(&b), "{a} -> {b}");
        }
    }

    #[test]
    fn bev_has_one_pixel_block_per_cell_and_draws_rooms() {
        let g = small_graph();
        let f = g.floors[&0].frame;
        let img = bev_image(&g, 0, 3).unwrap();
        assert_eq!((img.width() as usize, img.height() as usize), (f.width * 3, f.height * 3));
        assert!(img.pixels().any(|p| *p == ROOM_EDGE));
        assert!(img.pixels().any(|p| *p == OBJECT_EDGE));
        assert!(img.pixels().any(|p| *p == LOCATION_EDGE));
        // the location square [0.5, 1.5]² has its lower-left corner at image (15, 45)
        assert_eq!(*img.get_pixel(15, 44), LOCATION_EDGE);
        assert!(matches!(bev_image(&g, 9, 3), Err(ExportError::UnknownFloor(9))));
    }

    #[test]
    fn empty_graph_is_rejected() {
        let mut g = small_graph();
        g.floors.clear();
        assert!(matches!(graph_dot(&g), Err(ExportError::EmptyGraph)));
        assert!(matches!(write_bev_pngs(&g, Path::new("unused"), 2), Err(ExportError::EmptyGraph)));
    }
}
