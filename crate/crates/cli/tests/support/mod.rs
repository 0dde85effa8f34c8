//! Reference implementations the acceptance suite compares against. Each
//! one is the slow, obvious version of a library kernel.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use ovigo_core::edges::Relation;
use ovigo_core::geometry::{alpha_shape, BinaryMask, Box3D, DistanceField, LabelGrid, Point3, PointCloud, Polygon2D};
use ovigo_core::locations::LocationParams;

pub const NOISE: i32 = -1;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// O(n²) DBSCAN. Clusters are numbered by their lowest core index and a
/// border point joins the lowest-numbered cluster with a core point in reach.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<i32> {
    let n = points.len();
    let near = |i: usize, j: usize| dist2(&points[i], &points[j]) <= eps * eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
    let mut labels = vec![NOISE; n];
    let mut next = 0;
    for start in 0..n {
        if !core[start] || labels[start] != NOISE {
            continue;
        }
        // flood over core points only
        let mut stack = vec![start];
        labels[start] = next;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if core[j] && labels[j] == NOISE && near(i, j) {
                    labels[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    for i in 0..n {
        if !core[i] {
            labels[i] = (0..n)
                .filter(|&j| core[j] && near(i, j))
                .map(|j| labels[j])
                .min()
                .unwrap_or(NOISE);
        }
    }
    labels
}

/// Distance in cells from every cell to the nearest set cell.
pub fn edf(mask: &BinaryMask) -> Vec<f64> {
    let (h, w) = (mask.frame.height, mask.frame.width);
    let walls: Vec<(f64, f64)> = (0..h * w)
        .filter(|&i| mask.values[i])
        .map(|i| ((i / w) as f64, (i % w) as f64))
        .collect();
    (0..h * w)
        .map(|i| {
            let (r, c) = ((i / w) as f64, (i % w) as f64);
            walls.iter().map(|&(a, b)| ((r - a).powi(2) + (c - b).powi(2)).sqrt()).fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Otsu level over 256 equal bins spanning the value range, found by trying
/// every split and computing both class means from scratch.
pub fn otsu_level(values: &[f64]) -> usize {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bin = |v: f64| (((v - lo) / (hi - lo) * 256.0).floor().max(0.0) as usize).min(255);
    let bins: Vec<usize> = values.iter().map(|&v| bin(v)).collect();
    let mut best = (f64::NEG_INFINITY, 0);
    for t in 0..255 {
        let below: Vec<f64> = bins.iter().filter(|&&b| b <= t).map(|&b| b as f64).collect();
        let above: Vec<f64> = bins.iter().filter(|&&b| b > t).map(|&b| b as f64).collect();
        if below.is_empty() || above.is_empty() {
            continue;
        }
        let m0 = below.iter().sum::<f64>() / below.len() as f64;
        let m1 = above.iter().sum::<f64>() / above.len() as f64;
        let var = below.len() as f64 * above.len() as f64 * (m0 - m1).powi(2);
        // the first maximum wins; the tolerance absorbs summation order
        if var > best.0 * (1.0 + 1e-12) {
            best = (var, t);
        }
    }
    best.1
}

fn four_neighbors(i: usize, h: usize, w: usize) -> Vec<usize> {
    let (r, c) = (i / w, i % w);
    let mut out = Vec::new();
    if r > 0 {
        out.push(i - w);
    }
    if c > 0 {
        out.push(i - 1);
    }
    if c + 1 < w {
        out.push(i + 1);
    }
    if r + 1 < h {
        out.push(i + w);
    }
    out
}

/// Priority flood by exhaustive scan: each step labels the unlabeled
/// non-barrier cell touching the labeled region with the highest field value
/// (lowest index on ties), copying the label of its earliest-labeled neighbor.
pub fn priority_flood(field: &DistanceField, seeds: &LabelGrid, barrier: &BinaryMask) -> Vec<u32> {
    let (h, w) = (field.frame.height, field.frame.width);
    let n = h * w;
    let mut labels = vec![0u32; n];
    let mut when = vec![usize::MAX; n];
    let mut step = 0;
    for i in 0..n {
        if seeds.labels[i] != 0 && !barrier.values[i] {
            labels[i] = seeds.labels[i];
            when[i] = step;
            step += 1;
        }
    }
    loop {
        let mut pick: Option<usize> = None;
        for i in 0..n {
            if labels[i] != 0 || barrier.values[i] {
                continue;
            }
            if !four_neighbors(i, h, w).iter().any(|&j| labels[j] != 0) {
                continue;
            }
            if pick.is_none_or(|p| field.values[i] > field.values[p]) {
                pick = Some(i);
            }
        }
        let Some(i) = pick else { break };
        let from = four_neighbors(i, h, w)
            .into_iter()
            .filter(|&j| labels[j] != 0)
            .min_by_key(|&j| when[j])
            .unwrap();
        labels[i] = labels[from];
        when[i] = step;
        step += 1;
    }
    labels
}

/// Shoelace area over squared perimeter, scaled so a circle scores 1.
pub fn compactness(poly: &Polygon2D) -> f64 {
    let v = poly.vertices();
    let n = v.len();
    let (mut area2, mut per) = (0.0, 0.0);
    for k in 0..n {
        let (a, b) = (v[k], v[(k + 1) % n]);
        area2 += a[0] * b[1] - b[0] * a[1];
        per += (b[0] - a[0]).hypot(b[1] - a[1]);
    }
    4.0 * PI * (area2.abs() / 2.0) / (per * per)
}

pub struct OracleLocation {
    pub object_ids: Vec<u32>,
    pub polygon: Polygon2D,
    pub points: Vec<Point3>,
}

/// The geometric location detector spelled out step by step: height band,
/// naive DBSCAN, plurality reassignment per object, object count, alpha
/// shape, then the area and compactness filters.
pub fn detect_locations(cloud: &PointCloud, p: &LocationParams, reference: (f64, f64)) -> Vec<OracleLocation> {
    let ids = cloud.object_ids().unwrap();
    let span = reference.1 - reference.0;
    let (lo, hi) = (reference.0 + p.band.alpha_min * span, reference.0 + p.band.alpha_max * span);
    let kept: Vec<usize> = (0..cloud.len()).filter(|&i| (lo..=hi).contains(&cloud.points()[i][2])).collect();
    let pts: Vec<Vec<f64>> = kept.iter().map(|&i| cloud.points()[i].to_vec()).collect();
    let raw = dbscan(&pts, p.eps, p.min_pts);

    let mut votes: BTreeMap<u32, BTreeMap<i32, usize>> = BTreeMap::new();
    for (k, &i) in kept.iter().enumerate() {
        if raw[k] != NOISE {
            *votes.entry(ids[i]).or_default().entry(raw[k]).or_default() += 1;
        }
    }
    let owner: BTreeMap<u32, i32> = votes
        .iter()
        .map(|(&o, v)| {
            let top = *v.values().max().unwrap();
            (o, *v.iter().find(|(_, &c)| c == top).unwrap().0)
        })
        .collect();

    let mut clusters: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for &i in &kept {
        if let Some(&l) = owner.get(&ids[i]) {
            clusters.entry(l).or_default().push(i);
        }
    }
    let mut out = Vec::new();
    for members in clusters.values() {
        let objects: BTreeSet<u32> = members.iter().map(|&i| ids[i]).collect();
        if objects.len() < p.min_objects {
            continue;
        }
        let xy: Vec<[f64; 2]> = members.iter().map(|&i| [cloud.points()[i][0], cloud.points()[i][1]]).collect();
        let Ok(rings) = alpha_shape(&xy, p.alpha) else { continue };
        let Some(polygon) = rings.into_iter().next() else { continue };
        if polygon.area() < p.min_area || compactness(&polygon) < p.compactness_min {
            continue;
        }
        out.push(OracleLocation {
            object_ids: objects.into_iter().collect(),
            polygon,
            points: members.iter().map(|&i| cloud.points()[i]).collect(),
        });
    }
    out
}

/// Direction of the target from the anchor by its bearing relative to the
/// viewer's line of sight: within 45° of straight ahead is front, within 45°
/// of straight back is back, otherwise left or right. `None` on a boundary.
pub fn horizontal_relation(target: &Box3D, anchor: &Box3D, viewpoint: [f64; 2]) -> Option<Option<Relation>> {
    let (t, a) = (target.center(), anchor.center());
    let mid = [(t[0] + a[0]) / 2.0, (t[1] + a[1]) / 2.0];
    let sight = (mid[1] - viewpoint[1]).atan2(mid[0] - viewpoint[0]);
    let bearing = (t[1] - a[1]).atan2(t[0] - a[0]);
    let mut rel = bearing - sight;
    while rel > PI {
        rel -= 2.0 * PI;
    }
    while rel <= -PI {
        rel += 2.0 * PI;
    }
    if t[0] == a[0] && t[1] == a[1] {
        return Some(None);
    }
    let q = PI / 4.0;
    if [q, 3.0 * q].iter().any(|b| (rel.abs() - b).abs() < 1e-9) {
        return None;
    }
    Some(Some(if rel.abs() < q {
        Relation::Front
    } else if rel.abs() > 3.0 * q {
        Relation::Back
    } else if rel > 0.0 {
        Relation::Left
    } else {
        Relation::Right
    }))
}

/// Above or below when the target's center lies over the anchor's footprint
/// grown by `margin` and entirely clears its top or bottom face.
pub fn vertical_relation(target: &Box3D, anchor: &Box3D, margin: f64) -> Option<Relation> {
    let t = target.center();
    let over = (0..2).all(|k| t[k] >= anchor.min[k] - margin && t[k] <= anchor.max[k] + margin);
    if !over {
        None
    } else if t[2] > anchor.max[2] {
        Some(Relation::Above)
    } else if t[2] < anchor.min[2] {
        Some(Relation::Below)
    } else {
        None
    }
}

/// Camera-frame point of a world point under a camera-to-world pose with an
/// orthonormal rotation.
pub fn world_to_camera(pose: &[[f64; 4]; 4], p: Point3) -> Point3 {
    let d = [p[0] - pose[0][3], p[1] - pose[1][3], p[2] - pose[2][3]];
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        *o = (0..3).map(|r| pose[r][k] * d[r]).sum();
    }
    out
}
