//! Seeded layout of rooms and objects, and the scene point cloud.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::plan::{grid_plan, Density, FloorPlan, Rect};
use super::render::{self, Primitive};
use super::spec::{catalog, CameraSpec, FixtureSpec, SpecError};
use crate::eval::GtFloor;
use crate::geometry::{box3d_iou, convex_hull, Box3D, Point3, Polygon2D};

/// Gap kept between objects that must not share a location. Larger than
/// the default clustering radius with room to spare.
pub const FREE_GAP: f64 = 0.8;
/// Gap between any two objects with the same tag.
pub const SAME_TAG_GAP: f64 = 1.0;
const WALL_MARGIN: f64 = 0.15;
/// Clearance around camera positions, so no object is seen only from above.
pub const CAMERA_CLEARANCE: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtStorey {
    pub index: usize,
    pub z_floor: f64,
    pub z_ceiling: f64,
    pub plan: FloorPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtRoom {
    pub id: u32,
    pub storey: usize,
    pub tag: String,
    /// Floor area inside the walls.
    pub interior: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtLocation {
    pub id: u32,
    pub room: u32,
    pub tag: String,
    /// Convex hull of the member footprints.
    pub polygon: Vec<[f64; 2]>,
    pub objects: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtObject {
    pub id: u32,
    pub tag: String,
    pub room: u32,
    pub location: Option<u32>,
    pub bbox: Box3D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub storeys: Vec<GtStorey>,
    pub rooms: Vec<GtRoom>,
    pub locations: Vec<GtLocation>,
    pub objects: Vec<GtObject>,
}

impl GroundTruth {
    pub fn storey_of_room(&self, room: u32) -> usize {
        self.rooms[room as usize].storey
    }

    /// Location outlines grouped per storey, for location evaluation.
    pub fn location_floors(&self) -> Vec<GtFloor> {
        self.storeys
            .iter()
            .map(|st| GtFloor {
                z_floor: st.z_floor,
                polygons: self
                    .locations
                    .iter()
                    .filter(|l| self.storey_of_room(l.room) == st.index)
                    .map(|l| Polygon2D::new(l.polygon.clone()).expect("hull of object footprints"))
                    .collect(),
            })
            .collect()
    }
}

fn gap(a: &Rect, b: &Rect) -> f64 {
    let dx = (a.min[0] - b.max[0]).max(b.min[0] - a.max[0]).max(0.0);
    let dy = (a.min[1] - b.max[1]).max(b.min[1] - a.max[1]).max(0.0);
    dx.hypot(dy)
}

fn inside(inner: &Rect, r: &Rect, margin: f64) -> bool {
    r.min[0] >= inner.min[0] + margin
        && r.min[1] >= inner.min[1] + margin
        && r.max[0] <= inner.max[0] - margin
        && r.max[1] <= inner.max[1] - margin
}

struct Placed {
    rect: Rect,
    tag: String,
    group: Option<usize>,
    height: f64,
}

fn compatible(cand: &Rect, tag: &str, group: Option<usize>, placed: &[Placed], keep_out: &[[f64; 2]]) -> bool {
    let clear = keep_out.iter().all(|&[x, y]| gap(cand, &Rect::new(x, y, x, y)) >= CAMERA_CLEARANCE);
    clear && placed.iter().all(|p| {
        let g = gap(cand, &p.rect);
        let same_group = group.is_some() && p.group == group;
        let need = if same_group { 0.05 } else { FREE_GAP };
        g >= need && (p.tag != tag || g >= SAME_TAG_GAP)
    })
}

fn jittered<R: Rng>(rng: &mut R, tag: &str) -> ([f64; 2], f64) {
    let c = catalog(tag).expect("validated");
    let s = rng.random_range(0.95..1.05);
    ([c.size[0] * s, c.size[1] * s], c.height * rng.random_range(0.95..1.0))
}

fn rect_at(center: [f64; 2], size: [f64; 2]) -> Rect {
    Rect::new(center[0] - size[0] / 2.0, center[1] - size[1] / 2.0, center[0] + size[0] / 2.0, center[1] + size[1] / 2.0)
}

/// Wall sides without doors: 0 = -y, 1 = +y, 2 = -x, 3 = +x.
fn outer_sides(room: usize, n_rooms: usize) -> Vec<usize> {
    let mut s = vec![0, 1];
    if room == 0 {
        s.push(2);
    }
    if room + 1 == n_rooms {
        s.push(3);
    }
    s
}

/// Objects on both sides of a shared wall stay `FREE_GAP` apart, so they
/// never cluster through it.
fn clear_of_shared_walls(interior: &Rect, cand: &Rect, room: usize, n_rooms: usize) -> bool {
    let m = FREE_GAP / 2.0;
    (room == 0 || cand.min[0] >= interior.min[0] + m) && (room + 1 == n_rooms || cand.max[0] <= interior.max[0] - m)
}

fn place_room<R: Rng>(
    rng: &mut R,
    interior: &Rect,
    room: usize,
    n_rooms: usize,
    spec: &super::spec::RoomSpec,
    keep_out: &[[f64; 2]],
) -> Option<Vec<Placed>> {
    let mut placed: Vec<Placed> = Vec::new();
    for (g, loc) in spec.locations.iter().enumerate() {
        for (k, tag) in loc.objects.iter().enumerate() {
            let (mut size, height) = jittered(rng, tag);
            let mut ok = false;
            for _ in 0..400 {
                if rng.random_bool(0.5) {
                    size.swap(0, 1);
                }
                let cand = if k == 0 {
                    let m = 0.8;
                    if interior.max[0] - interior.min[0] < 2.0 * m + size[0] || interior.max[1] - interior.min[1] < 2.0 * m + size[1] {
                        return None;
                    }
                    let x = rng.random_range(interior.min[0] + m + size[0] / 2.0..interior.max[0] - m - size[0] / 2.0);
                    let y = rng.random_range(interior.min[1] + m + size[1] / 2.0..interior.max[1] - m - size[1] / 2.0);
                    rect_at([x, y], size)
                } else {
                    let members: Vec<&Placed> = placed.iter().filter(|p| p.group == Some(g)).collect();
                    let host = members[rng.random_range(0..members.len())].rect;
                    let gap = rng.random_range(0.08..0.2);
                    let along = |lo: f64, hi: f64, s: f64, r: &mut R| {
                        let span = ((hi - lo) - s).abs() / 2.0;
                        (lo + hi) / 2.0 + r.random_range(-span.max(0.01)..span.max(0.01)) * 0.5
                    };
                    match rng.random_range(0..4) {
                        0 => rect_at([along(host.min[0], host.max[0], size[0], rng), host.min[1] - gap - size[1] / 2.0], size),
                        1 => rect_at([along(host.min[0], host.max[0], size[0], rng), host.max[1] + gap + size[1] / 2.0], size),
                        2 => rect_at([host.min[0] - gap - size[0] / 2.0, along(host.min[1], host.max[1], size[1], rng)], size),
                        _ => rect_at([host.max[0] + gap + size[0] / 2.0, along(host.min[1], host.max[1], size[1], rng)], size),
                    }
                };
                if inside(interior, &cand, WALL_MARGIN) && clear_of_shared_walls(interior, &cand, room, n_rooms) && compatible(&cand, tag, Some(g), &placed, keep_out) {
                    placed.push(Placed { rect: cand, tag: tag.clone(), group: Some(g), height });
                    ok = true;
                    break;
                }
            }
            if !ok {
                return None;
            }
        }
    }
    // wall-mounted objects before free ones; they have fewer valid spots
    let mut order: Vec<&String> = spec.objects.iter().filter(|t| catalog(t).unwrap().on_wall).collect();
    order.extend(spec.objects.iter().filter(|t| !catalog(t).unwrap().on_wall));
    let sides = outer_sides(room, n_rooms);
    for tag in order {
        let entry = catalog(tag).unwrap();
        let (size0, height) = jittered(rng, tag);
        let mut ok = false;
        for _ in 0..400 {
            let cand = if entry.on_wall {
                let side = sides[rng.random_range(0..sides.len())];
                let d = 0.02;
                let size = if side < 2 { size0 } else { [size0[1], size0[0]] };
                let lo = [interior.min[0] + WALL_MARGIN + size[0] / 2.0, interior.min[1] + WALL_MARGIN + size[1] / 2.0];
                let hi = [interior.max[0] - WALL_MARGIN - size[0] / 2.0, interior.max[1] - WALL_MARGIN - size[1] / 2.0];
                let c = match side {
                    0 => [rng.random_range(lo[0]..hi[0]), interior.min[1] + d + size[1] / 2.0],
                    1 => [rng.random_range(lo[0]..hi[0]), interior.max[1] - d - size[1] / 2.0],
                    2 => [interior.min[0] + d + size[0] / 2.0, rng.random_range(lo[1]..hi[1])],
                    _ => [interior.max[0] - d - size[0] / 2.0, rng.random_range(lo[1]..hi[1])],
                };
                rect_at(c, size)
            } else {
                let size = if rng.random_bool(0.5) { size0 } else { [size0[1], size0[0]] };
                let x = rng.random_range(interior.min[0] + WALL_MARGIN + size[0] / 2.0..interior.max[0] - WALL_MARGIN - size[0] / 2.0);
                let y = rng.random_range(interior.min[1] + WALL_MARGIN + size[1] / 2.0..interior.max[1] - WALL_MARGIN - size[1] / 2.0);
                rect_at([x, y], size)
            };
            let margin = if entry.on_wall { 0.0 } else { WALL_MARGIN };
            if inside(interior, &cand, margin) && clear_of_shared_walls(interior, &cand, room, n_rooms) && compatible(&cand, tag, None, &placed, keep_out) {
                placed.push(Placed { rect: cand, tag: tag.clone(), group: None, height });
                ok = true;
                break;
            }
        }
        if !ok {
            return None;
        }
    }
    Some(placed)
}

/// Camera positions of a room: its inner corners moved in by `inset`.
pub fn camera_corners(interior: &Rect, inset: f64) -> [[f64; 2]; 4] {
    let r = interior.shrink(inset);
    [[r.min[0], r.min[1]], [r.max[0], r.min[1]], [r.max[0], r.max[1]], [r.min[0], r.max[1]]]
}

const PLACEMENT_ATTEMPTS: usize = 200;
/// Box IoU between an object and the extent of everything detected of it.
const MIN_COVERAGE_IOU: f64 = 0.8;

fn placed_box(p: &Placed, z_floor: f64) -> Box3D {
    Box3D::new([p.rect.min[0], p.rect.min[1], z_floor], [p.rect.max[0], p.rect.max[1], z_floor + p.height]).expect("positive size")
}

/// Whether the room's corner cameras detect each placed object at least
/// once, and its detected pixels over all frames span most of its box. With
/// doors closed nothing outside the room is visible.
fn all_detected(shell: &[Primitive], interior: &Rect, z_floor: f64, placed: &[Placed], cam: &CameraSpec) -> bool {
    let boxes: Vec<Box3D> = placed.iter().map(|p| placed_box(p, z_floor)).collect();
    let mut prims = shell.to_vec();
    prims.extend(boxes.iter().enumerate().map(|(i, b)| Primitive {
        bbox: *b,
        object: Some(i as u32),
    }));
    let intr = render::intrinsics(cam);
    let mut seen: Vec<Option<([f64; 3], [f64; 3])>> = vec![None; placed.len()];
    for pose in render::room_cameras(interior, z_floor, cam) {
        let img = render::render(&prims, &intr, &pose, cam.width, cam.height);
        let eye = [pose[0][3], pose[1][3], pose[2][3]];
        for (i, b) in boxes.iter().enumerate() {
            let Some(mask) = render::detected_mask(&img, i as u32, b, &intr, &pose, cam.width, cam.height) else {
                continue;
            };
            let ext = seen[i].get_or_insert(([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]));
            for (idx, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
                let (u, v) = (idx as u32 % cam.width, idx as u32 / cam.width);
                let t = img.depth[idx].expect("object pixels have depth");
                let d = render::pixel_ray(&intr, &pose, u, v);
                for k in 0..3 {
                    let x = eye[k] + t * d[k];
                    ext.0[k] = ext.0[k].min(x);
                    ext.1[k] = ext.1[k].max(x);
                }
            }
        }
    }
    seen.iter().zip(&boxes).all(|(ext, b)| {
        ext.and_then(|(lo, hi)| Box3D::new(lo, hi).ok())
            .is_some_and(|e| box3d_iou(&e, b).unwrap_or(0.0) >= MIN_COVERAGE_IOU)
    })
}

/// Lays out every storey, room and object of `spec`.
pub fn layout<R: Rng>(spec: &FixtureSpec, rng: &mut R) -> Result<GroundTruth, SpecError> {
    let mut gt = GroundTruth {
        storeys: Vec::new(),
        rooms: Vec::new(),
        locations: Vec::new(),
        objects: Vec::new(),
    };
    for (si, st) in spec.storeys.iter().enumerate() {
        let plan = grid_plan(1, st.rooms.len(), st.room_size, spec.door_width, st.z_floor, st.height);
        for (ri, rs) in st.rooms.iter().enumerate() {
            let interior = plan.interior(ri);
            let keep_out = camera_corners(&interior, spec.camera.corner_inset);
            let shell = render::shell_primitives(&plan, st.z_floor, st.z_floor + st.height);
            let placed = (0..PLACEMENT_ATTEMPTS)
                .filter_map(|_| place_room(rng, &interior, ri, st.rooms.len(), rs, &keep_out))
                .find(|placed| all_detected(&shell, &interior, st.z_floor, placed, &spec.camera))
                .ok_or_else(|| SpecError {
                    path: format!("storeys[{si}].rooms[{ri}]"),
                    msg: "no arrangement fits the room with every object detected".into(),
                })?;
            let room_id = gt.rooms.len() as u32;
            gt.rooms.push(GtRoom {
                id: room_id,
                storey: si,
                tag: rs.tag.clone(),
                interior,
            });
            let loc_base = gt.locations.len() as u32;
            for (g, ls) in rs.locations.iter().enumerate() {
                gt.locations.push(GtLocation {
                    id: loc_base + g as u32,
                    room: room_id,
                    tag: ls.tag.clone(),
                    polygon: Vec::new(),
                    objects: Vec::new(),
                });
            }
            for p in placed {
                let id = gt.objects.len() as u32;
                let bbox = placed_box(&p, st.z_floor);
                let location = p.group.map(|g| loc_base + g as u32);
                if let Some(l) = location {
                    gt.locations[l as usize].objects.push(id);
                }
                gt.objects.push(GtObject {
                    id,
                    tag: p.tag,
                    room: room_id,
                    location,
                    bbox,
                });
            }
        }
        gt.storeys.push(GtStorey {
            index: si,
            z_floor: st.z_floor,
            z_ceiling: st.z_floor + st.height,
            plan,
        });
    }
    for loc in &mut gt.locations {
        let corners: Vec<[f64; 2]> = loc
            .objects
            .iter()
            .flat_map(|&o| {
                let b = gt.objects[o as usize].bbox;
                [[b.min[0], b.min[1]], [b.max[0], b.min[1]], [b.max[0], b.max[1]], [b.min[0], b.max[1]]]
            })
            .collect();
        loc.polygon = convex_hull(&corners).expect("non-degenerate footprints").vertices().to_vec();
    }
    Ok(gt)
}

/// Samples the five visible faces of a box.
pub fn sample_box<R: Rng>(rng: &mut R, b: &Box3D, density: f64, out: &mut Vec<Point3>) {
    let [sx, sy, sz] = [b.max[0] - b.min[0], b.max[1] - b.min[1], b.max[2] - b.min[2]];
    let n = |a: f64| (a * density).round() as usize;
    for _ in 0..n(sx * sy) {
        out.push([rng.random_range(b.min[0]..b.max[0]), rng.random_range(b.min[1]..b.max[1]), b.max[2]]);
    }
    for y in [b.min[1], b.max[1]] {
        for _ in 0..n(sx * sz) {
            out.push([rng.random_range(b.min[0]..b.max[0]), y, rng.random_range(b.min[2]..b.max[2])]);
        }
    }
    for x in [b.min[0], b.max[0]] {
        for _ in 0..n(sy * sz) {
            out.push([x, rng.random_range(b.min[1]..b.max[1]), rng.random_range(b.min[2]..b.max[2])]);
        }
    }
}

/// Floors, ceilings, walls and objects, plus uniform noise over the bounding
/// box making up `noise_fraction` of the result.
pub fn scene_cloud<R: Rng>(gt: &GroundTruth, density: f64, noise_fraction: f64, rng: &mut R) -> Vec<Point3> {
    let d = Density {
        floor: density,
        ceiling: density,
        wall: density,
    };
    let mut pts = Vec::new();
    for st in &gt.storeys {
        pts.extend(st.plan.sample(rng, d));
    }
    for o in &gt.objects {
        sample_box(rng, &o.bbox, density, &mut pts);
    }
    if noise_fraction > 0.0 && !pts.is_empty() {
        let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for p in &pts {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let n = (pts.len() as f64 * noise_fraction / (1.0 - noise_fraction)).round() as usize;
        for _ in 0..n {
            pts.push([rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1]), rng.random_range(lo[2]..hi[2])]);
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn apartment_layout_respects_gaps() {
        let spec = FixtureSpec::apartment(3);
        let gt = layout(&spec, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(gt.objects.len(), 40);
        assert_eq!(gt.rooms.len(), 5);
        assert_eq!(gt.locations.len(), 3);
        let fp = |o: &GtObject| Rect::new(o.bbox.min[0], o.bbox.min[1], o.bbox.max[0], o.bbox.max[1]);
        for a in &gt.objects {
            let interior = gt.rooms[a.room as usize].interior;
            assert!(inside(&interior, &fp(a), 0.0), "object {} leaves its room", a.id);
            for b in gt.objects.iter().filter(|b| b.id > a.id && b.room == a.room) {
                let g = gap(&fp(a), &fp(b));
                if a.tag == b.tag {
                    assert!(g >= SAME_TAG_GAP);
                }
                if a.location.is_none() || a.location != b.location {
                    assert!(g >= FREE_GAP, "{} and {} too close", a.id, b.id);
                }
            }
        }
        // members of a location form one chain of small gaps
        for loc in &gt.locations {
            let mut reached = vec![loc.objects[0]];
            let mut grew = true;
            while grew {
                grew = false;
                for &o in &loc.objects {
                    let near = reached.iter().any(|&r| gap(&fp(&gt.objects[r as usize]), &fp(&gt.objects[o as usize])) < 0.25);
                    if !reached.contains(&o) && near {
                        reached.push(o);
                        grew = true;
                    }
                }
            }
            assert_eq!(reached.len(), loc.objects.len());
        }
    }
}
