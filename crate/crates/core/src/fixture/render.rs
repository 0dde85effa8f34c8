//! Pinhole ray casting against axis-aligned boxes: depth plus an object id
//! buffer, which gives exact detection masks.

use super::plan::{FloorPlan, Rect};
use super::scene::{camera_corners, GroundTruth};
use super::spec::CameraSpec;
use crate::geometry::{Box3D, Point3};
use super::{MIN_DETECTION_PIXELS, MIN_VISIBLE_FRACTION};
use crate::objects::{Intrinsics, Pose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub bbox: Box3D,
    pub object: Option<u32>,
}

/// Ray parameter of the first hit in front of the origin.
fn hit(b: &Box3D, o: Point3, d: Point3) -> Option<f64> {
    let (mut t0, mut t1) = (1e-9_f64, f64::INFINITY);
    for k in 0..3 {
        if d[k].abs() < 1e-15 {
            if o[k] < b.min[k] || o[k] > b.max[k] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[k];
        let (mut a, mut c) = ((b.min[k] - o[k]) * inv, (b.max[k] - o[k]) * inv);
        if a > c {
            std::mem::swap(&mut a, &mut c);
        }
        t0 = t0.max(a);
        t1 = t1.min(c);
        if t0 > t1 {
            return None;
        }
    }
    Some(t0)
}

/// Wall boxes of a plan, with door openings cut out.
pub fn wall_boxes(plan: &FloorPlan) -> Vec<Rect> {
    let h = plan.wall_thickness / 2.0;
    // (vertical, fixed coordinate, start, end)
    let mut segs: Vec<(bool, f64, f64, f64)> = Vec::new();
    for r in &plan.rooms {
        for s in [
            (false, r.min[1], r.min[0], r.max[0]),
            (false, r.max[1], r.min[0], r.max[0]),
            (true, r.min[0], r.min[1], r.max[1]),
            (true, r.max[0], r.min[1], r.max[1]),
        ] {
            let dup = segs.iter().any(|q| q.0 == s.0 && (q.1 - s.1).abs() < 1e-9 && (q.2 - s.2).abs() < 1e-9 && (q.3 - s.3).abs() < 1e-9);
            if !dup {
                segs.push(s);
            }
        }
    }
    let mut out = Vec::new();
    for (vertical, c, a, b) in segs {
        let mut pieces = vec![(a - h, b + h)];
        for d in &plan.doors {
            let (across, along) = if vertical { ((d.min[0], d.max[0]), (d.min[1], d.max[1])) } else { ((d.min[1], d.max[1]), (d.min[0], d.max[0])) };
            if across.0 > c || across.1 < c {
                continue;
            }
            pieces = pieces
                .into_iter()
                .flat_map(|(s, e)| {
                    let mut v = Vec::new();
                    if along.0 > s {
                        v.push((s, along.0.min(e)));
                    }
                    if along.1 < e {
                        v.push((along.1.max(s), e));
                    }
                    v
                })
                .filter(|(s, e)| e - s > 1e-9)
                .collect();
        }
        for (s, e) in pieces {
            out.push(if vertical { Rect::new(c - h, s, c + h, e) } else { Rect::new(s, c - h, e, c + h) });
        }
    }
    out
}

/// Floor and ceiling slabs plus walls. Doors are closed while frames are
/// captured, so each room is seen alone.
pub fn shell_primitives(plan: &FloorPlan, z_floor: f64, z_ceiling: f64) -> Vec<Primitive> {
    let fp = plan.footprint();
    let slab = |z0: f64, z1: f64| Box3D::new([fp.min[0], fp.min[1], z0], [fp.max[0], fp.max[1], z1]).unwrap();
    let mut prims = vec![
        Primitive { bbox: slab(z_floor - 0.05, z_floor), object: None },
        Primitive { bbox: slab(z_ceiling, z_ceiling + 0.05), object: None },
    ];
    let mut closed = plan.clone();
    closed.doors.clear();
    for w in wall_boxes(&closed) {
        prims.push(Primitive {
            bbox: Box3D::new([w.min[0], w.min[1], z_floor], [w.max[0], w.max[1], z_ceiling]).unwrap(),
            object: None,
        });
    }
    prims
}

/// Everything a camera on `storey` can see.
pub fn storey_primitives(gt: &GroundTruth, storey: usize) -> Vec<Primitive> {
    let st = &gt.storeys[storey];
    let mut prims = shell_primitives(&st.plan, st.z_floor, st.z_ceiling);
    for o in gt.objects.iter().filter(|o| gt.storey_of_room(o.room) == storey) {
        prims.push(Primitive { bbox: o.bbox, object: Some(o.id) });
    }
    prims
}

pub fn intrinsics(cam: &CameraSpec) -> Intrinsics {
    Intrinsics {
        fx: cam.fx,
        fy: cam.fy,
        cx: (cam.width as f64 - 1.0) / 2.0,
        cy: (cam.height as f64 - 1.0) / 2.0,
    }
}

/// One camera per inner corner, looking at the room center on the floor.
pub fn room_cameras(interior: &Rect, z_floor: f64, cam: &CameraSpec) -> Vec<Pose> {
    let c = interior.center();
    camera_corners(interior, cam.corner_inset)
        .into_iter()
        .map(|corner| look_at([corner[0], corner[1], z_floor + cam.mount_height], [c[0], c[1], z_floor]))
        .collect()
}

/// Pixels of `id` the simulated detector reports, or `None` when the
/// instance is too small, truncated by the border or mostly occluded.
pub fn detected_mask(img: &Rendered, id: u32, bbox: &Box3D, intr: &Intrinsics, pose: &Pose, width: u32, height: u32) -> Option<Vec<bool>> {
    let mask: Vec<bool> = img.ids.iter().map(|&i| i == Some(id)).collect();
    let count = mask.iter().filter(|&&m| m).count();
    if count < MIN_DETECTION_PIXELS {
        return None;
    }
    let (full, truncated) = silhouette(bbox, intr, pose, width, height);
    if truncated || (count as f64) < MIN_VISIBLE_FRACTION * full as f64 {
        return None;
    }
    Some(mask)
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Point3, b: Point3) -> Point3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalized(a: Point3) -> Point3 {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Camera-to-world pose looking from `eye` at `target`, with x right, y down
/// and z forward in the camera frame.
pub fn look_at(eye: Point3, target: Point3) -> Pose {
    let f = normalized(sub(target, eye));
    let r = normalized(cross(f, [0.0, 0.0, 1.0]));
    let d = cross(f, r);
    [
        [r[0], d[0], f[0], eye[0]],
        [r[1], d[1], f[1], eye[1]],
        [r[2], d[2], f[2], eye[2]],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

pub struct Rendered {
    /// z-depth in meters, `None` where the ray escapes.
    pub depth: Vec<Option<f64>>,
    pub ids: Vec<Option<u32>>,
}

/// World direction through integer pixel `(u, v)`, scaled to unit depth.
pub fn pixel_ray(intr: &Intrinsics, pose: &Pose, u: u32, v: u32) -> Point3 {
    let c = [(u as f64 - intr.cx) / intr.fx, (v as f64 - intr.cy) / intr.fy, 1.0];
    [
        pose[0][0] * c[0] + pose[0][1] * c[1] + pose[0][2],
        pose[1][0] * c[0] + pose[1][1] * c[1] + pose[1][2],
        pose[2][0] * c[0] + pose[2][1] * c[1] + pose[2][2],
    ]
}

/// Casts one ray through each integer pixel position.
pub fn render(prims: &[Primitive], intr: &Intrinsics, pose: &Pose, width: u32, height: u32) -> Rendered {
    let n = (width * height) as usize;
    let mut depth = vec![None; n];
    let mut ids = vec![None; n];
    let eye = [pose[0][3], pose[1][3], pose[2][3]];
    for v in 0..height {
        for u in 0..width {
            let d = pixel_ray(intr, pose, u, v);
            let mut best: Option<(f64, Option<u32>)> = None;
            for p in prims {
                if let Some(t) = hit(&p.bbox, eye, d) {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, p.object));
                    }
                }
            }
            if let Some((t, id)) = best {
                // with a unit forward component the ray parameter is the z-depth
                let idx = (v * width + u) as usize;
                depth[idx] = Some(t);
                ids[idx] = id;
            }
        }
    }
    Rendered { depth, ids }
}

/// Pixels a box would cover with nothing in front of it, and whether that
/// footprint reaches the image border.
pub fn silhouette(bbox: &Box3D, intr: &Intrinsics, pose: &Pose, width: u32, height: u32) -> (usize, bool) {
    let eye = [pose[0][3], pose[1][3], pose[2][3]];
    let mut count = 0;
    let mut border = false;
    for v in 0..height {
        for u in 0..width {
            let d = pixel_ray(intr, pose, u, v);
            if hit(bbox, eye, d).is_some() {
                count += 1;
                border |= u == 0 || v == 0 || u + 1 == width || v + 1 == height;
            }
        }
    }
    (count, border)
}
