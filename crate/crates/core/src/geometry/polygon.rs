use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{BinaryMask, GeometryError, GridFrame, Result};

/// Simple closed ring in meters, stored counter-clockwise without repeating
/// the first vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Polygon2D {
    vertices: Vec<[f64; 2]>,
}

impl TryFrom<Vec<[f64; 2]>> for Polygon2D {
    type Error = GeometryError;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        Polygon2D::new(v)
    }
}

impl From<Polygon2D> for Vec<[f64; 2]> {
    fn from(p: Polygon2D) -> Self {
        p.vertices
    }
}

impl Polygon2D {
    pub fn new(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(GeometryError::DegeneratePolygon(format!(
                "{} vertices",
                vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(GeometryError::DegeneratePolygon("non-finite vertex".into()));
        }
        let signed = signed_area(&vertices);
        if signed == 0.0 {
            return Err(GeometryError::DegeneratePolygon("zero area".into()));
        }
        if signed < 0.0 {
            vertices.reverse();
        }
        let poly = Self { vertices };
        if !poly.is_simple() {
            return Err(GeometryError::DegeneratePolygon("self-intersecting ring".into()));
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| dist(a, b)).sum()
    }

    fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Even-odd ray casting; boundary points may land on either side.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Cells of `frame` whose centers fall inside the polygon.
    pub fn rasterize(&self, frame: GridFrame) -> BinaryMask {
        let mut mask = BinaryMask::new(frame);
        let (lo, hi) = self.bounds();
        let m = frame.meters_per_pixel;
        let c0 = (((lo[0] - frame.origin_xy[0]) / m).floor().max(0.0)) as usize;
        let r0 = (((lo[1] - frame.origin_xy[1]) / m).floor().max(0.0)) as usize;
        let c1 = (((hi[0] - frame.origin_xy[0]) / m).ceil().max(0.0) as usize).min(frame.width);
        let r1 = (((hi[1] - frame.origin_xy[1]) / m).ceil().max(0.0) as usize).min(frame.height);
        for r in r0..r1 {
            for c in c0..c1 {
                if self.contains(frame.cell_center(r, c)) {
                    mask.set(r, c, true);
                }
            }
        }
        mask
    }

    fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            for j in i + 1..n {
                // adjacent edges share a vertex by construction
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (c, d) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

fn signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let on_segment = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        r[0] >= p[0].min(q[0]) && r[0] <= p[0].max(q[0]) && r[1] >= p[1].min(q[1]) && r[1] <= p[1].max(q[1])
    };
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// `4πS / PR²`: 1 for a circle, smaller for elongated shapes.
pub fn polygon_compactness(poly: &Polygon2D) -> Result<f64> {
    let pr = poly.perimeter();
    if !(pr > 0.0) {
        return Err(GeometryError::DegeneratePolygon("zero perimeter".into()));
    }
    Ok(4.0 * PI * poly.area() / (pr * pr))
}

/// Andrew's monotone chain.
pub fn convex_hull(points: &[[f64; 2]]) -> Result<Polygon2D> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return Err(GeometryError::DegenerateCluster(format!("{} distinct points", pts.len())));
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        return Err(GeometryError::DegenerateCluster("collinear points".into()));
    }
    Polygon2D::new(hull)
}

/// Outer boundaries of the union of Delaunay triangles whose circumradius is
/// below `1 / alpha`. `alpha == 0` keeps every triangle, giving the convex
/// hull. Holes are filled; rings that touch at a single vertex come back as
/// separate polygons, largest area first.
pub fn alpha_shape(points: &[[f64; 2]], alpha: f64) -> Result<Vec<Polygon2D>> {
    if !(alpha >= 0.0) {
        return Err(GeometryError::InvalidParameter(format!("alpha = {alpha}")));
    }
    if points.len() < 3 {
        return Err(GeometryError::DegenerateCluster(format!("{} points", points.len())));
    }
    let dpts: Vec<delaunator::Point> = points
        .iter()
        .map(|p| delaunator::Point { x: p[0], y: p[1] })
        .collect();
    let tri = delaunator::triangulate(&dpts);
    if tri.triangles.is_empty() {
        return Err(GeometryError::DegenerateCluster("collinear points".into()));
    }
    let n_tri = tri.triangles.len() / 3;
    let max_radius = if alpha > 0.0 { 1.0 / alpha } else { f64::INFINITY };
    let keep: Vec<bool> = (0..n_tri)
        .map(|t| {
            let [a, b, c] = [0, 1, 2].map(|k| points[tri.triangles[3 * t + k]]);
            circumradius(a, b, c) < max_radius
        })
        .collect();

    // boundary half-edges directed counter-clockwise around kept triangles
    let mut outgoing: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for t in (0..n_tri).filter(|&t| keep[t]) {
        let v = [0, 1, 2].map(|k| tri.triangles[3 * t + k]);
        let ccw = cross(points[v[0]], points[v[1]], points[v[2]]) > 0.0;
        for k in 0..3 {
            let he = 3 * t + k;
            let opp = tri.halfedges[he];
            let shared = opp != delaunator::EMPTY && keep[opp / 3];
            if shared {
                continue;
            }
            let (a, b) = (v[k], v[(k + 1) % 3]);
            let (from, to) = if ccw { (a, b) } else { (b, a) };
            outgoing.entry(from).or_default().push(to);
        }
    }
    for targets in outgoing.values_mut() {
        targets.sort_unstable();
    }

    let mut rings = Vec::new();
    while let Some((&start, _)) = outgoing.iter().find(|(_, t)| !t.is_empty()) {
        let first = outgoing.get_mut(&start).unwrap().remove(0);
        let mut ring = vec![start];
        let (mut prev, mut cur) = (start, first);
        while cur != start {
            ring.push(cur);
            let cands = outgoing.get_mut(&cur).expect("boundary edges form closed rings");
            let pick = if cands.len() == 1 {
                0
            } else {
                turn_choice(points, prev, cur, cands)
            };
            let next = cands.remove(pick);
            prev = cur;
            cur = next;
        }
        let coords: Vec<[f64; 2]> = ring.iter().map(|&i| points[i]).collect();
        if signed_area(&coords) > 0.0 {
            rings.push(Polygon2D::new(coords)?);
        }
    }
    rings.sort_by(|a, b| b.area().total_cmp(&a.area()));
    Ok(rings)
}

/// At a pinch vertex, continue along the boundary of the same triangle fan:
/// the first outgoing edge met when sweeping clockwise from the reversed
/// incoming edge.
fn turn_choice(points: &[[f64; 2]], prev: usize, cur: usize, cands: &[usize]) -> usize {
    let angle = |to: usize| {
        let (o, p) = (points[cur], points[to]);
        (p[1] - o[1]).atan2(p[0] - o[0])
    };
    let back = angle(prev);
    let mut best = (f64::INFINITY, 0);
    for (k, &c) in cands.iter().enumerate() {
        let mut sweep = back - angle(c);
        while sweep <= 0.0 {
            sweep += 2.0 * PI;
        }
        while sweep > 2.0 * PI {
            sweep -= 2.0 * PI;
        }
        if sweep < best.0 {
            best = (sweep, k);
        }
    }
    best.1
}

fn circumradius(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let (ab, bc, ca) = (dist(a, b), dist(b, c), dist(c, a));
    let area2 = cross(a, b, c).abs();
    if area2 == 0.0 {
        return f64::INFINITY;
    }
    ab * bc * ca / (2.0 * area2)
}
