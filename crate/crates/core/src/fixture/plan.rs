//! Axis-aligned floor plans: rectangular rooms, walls centered on their
//! boundaries, and door openings.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{BinaryMask, GridFrame, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            min: [x0, y0],
            max: [x1, y1],
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }

    pub fn shrink(&self, d: f64) -> Rect {
        Rect::new(self.min[0] + d, self.min[1] + d, self.max[0] - d, self.max[1] - d)
    }

    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]) * (self.max[1] - self.min[1])
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.min[0] + self.max[0]) / 2.0, (self.min[1] + self.max[1]) / 2.0]
    }

    /// Distance from an inside point to the nearest edge, or from outside
    /// to the rectangle.
    fn boundary_distance(&self, x: f64, y: f64) -> f64 {
        let dx_out = (self.min[0] - x).max(x - self.max[0]).max(0.0);
        let dy_out = (self.min[1] - y).max(y - self.max[1]).max(0.0);
        if dx_out > 0.0 || dy_out > 0.0 {
            return dx_out.hypot(dy_out);
        }
        (x - self.min[0]).min(self.max[0] - x).min(y - self.min[1]).min(self.max[1] - y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorPlan {
    pub rooms: Vec<Rect>,
    /// Openings cut through walls.
    pub doors: Vec<Rect>,
    pub wall_thickness: f64,
    pub z_floor: f64,
    pub height: f64,
}

/// Point budget per surface kind, in points per square meter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Density {
    pub floor: f64,
    pub ceiling: f64,
    pub wall: f64,
}

impl Default for Density {
    fn default() -> Self {
        Self {
            floor: 400.0,
            ceiling: 400.0,
            wall: 400.0,
        }
    }
}

impl FloorPlan {
    pub fn footprint(&self) -> Rect {
        let h = self.wall_thickness / 2.0;
        let mut r = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for room in &self.rooms {
            r.min[0] = r.min[0].min(room.min[0] - h);
            r.min[1] = r.min[1].min(room.min[1] - h);
            r.max[0] = r.max[0].max(room.max[0] + h);
            r.max[1] = r.max[1].max(room.max[1] + h);
        }
        r
    }

    pub fn is_wall(&self, x: f64, y: f64) -> bool {
        let h = self.wall_thickness / 2.0;
        self.rooms.iter().any(|r| r.boundary_distance(x, y) <= h) && !self.doors.iter().any(|d| d.contains(x, y))
    }

    pub fn inside(&self, x: f64, y: f64) -> bool {
        let h = self.wall_thickness / 2.0;
        self.rooms.iter().any(|r| r.boundary_distance(x, y) <= h || r.contains(x, y))
    }

    /// Floor interior of room `i`, excluding its walls.
    pub fn interior(&self, i: usize) -> Rect {
        self.rooms[i].shrink(self.wall_thickness / 2.0)
    }

    /// Ground-truth room masks: cells whose center lies in the interior.
    pub fn room_masks(&self, frame: GridFrame) -> Vec<BinaryMask> {
        (0..self.rooms.len())
            .map(|i| {
                let inner = self.interior(i);
                let mut m = BinaryMask::new(frame);
                for r in 0..frame.height {
                    for c in 0..frame.width {
                        let [x, y] = frame.cell_center(r, c);
                        if inner.contains(x, y) {
                            m.set(r, c, true);
                        }
                    }
                }
                m
            })
            .collect()
    }

    /// Surface samples of floor, ceiling and walls.
    pub fn sample<R: Rng>(&self, rng: &mut R, density: Density) -> Vec<Point3> {
        let fp = self.footprint();
        let mut pts = Vec::new();
        let jitter = 0.003;
        let bbox_area = fp.area();
        let mut scatter = |n: usize, rng: &mut R, accept: &dyn Fn(f64, f64) -> bool, z: &dyn Fn(&mut R) -> f64| {
            let mut got = 0;
            let mut tries = 0;
            while got < n && tries < n * 200 + 1000 {
                tries += 1;
                let x = rng.random_range(fp.min[0]..fp.max[0]);
                let y = rng.random_range(fp.min[1]..fp.max[1]);
                if accept(x, y) {
                    pts.push([x, y, z(rng)]);
                    got += 1;
                }
            }
        };
        let (z0, z1) = (self.z_floor, self.z_floor + self.height);
        let inside_area: f64 = self.rooms.iter().map(Rect::area).sum();
        let n_floor = (inside_area * density.floor) as usize;
        let n_ceiling = (inside_area * density.ceiling) as usize;
        scatter(n_floor, rng, &|x, y| self.inside(x, y), &|r| z0 + r.random_range(-jitter..jitter));
        scatter(n_ceiling, rng, &|x, y| self.inside(x, y), &|r| z1 + r.random_range(-jitter..jitter));
        // wall area is estimated by the acceptance rate of a probe batch
        let probe = 4000;
        let hits = (0..probe)
            .filter(|_| {
                let x = rng.random_range(fp.min[0]..fp.max[0]);
                let y = rng.random_range(fp.min[1]..fp.max[1]);
                self.is_wall(x, y)
            })
            .count();
        let wall_footprint = bbox_area * hits as f64 / probe as f64;
        let wall_len = wall_footprint / self.wall_thickness.max(1e-6);
        let n_wall = (wall_len * self.height * density.wall) as usize;
        scatter(n_wall, rng, &|x, y| self.is_wall(x, y), &|r| r.random_range(z0..z1));
        pts
    }
}

/// `rows × cols` grid of rooms of the given size, with one door per shared
/// wall at its midpoint.
pub fn grid_plan(rows: usize, cols: usize, size: [f64; 2], door_width: f64, z_floor: f64, height: f64) -> FloorPlan {
    let mut rooms = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let x0 = c as f64 * size[0];
            let y0 = r as f64 * size[1];
            rooms.push(Rect::new(x0, y0, x0 + size[0], y0 + size[1]));
        }
    }
    let t = 0.1;
    let mut doors = Vec::new();
    if door_width > 0.0 {
        let hw = door_width / 2.0;
        for r in 0..rows {
            for c in 0..cols {
                let x0 = c as f64 * size[0];
                let y0 = r as f64 * size[1];
                if c + 1 < cols {
                    let x = x0 + size[0];
                    let ym = y0 + size[1] / 2.0;
                    doors.push(Rect::new(x - t, ym - hw, x + t, ym + hw));
                }
                if r + 1 < rows {
                    let y = y0 + size[1];
                    let xm = x0 + size[0] / 2.0;
                    doors.push(Rect::new(xm - hw, y - t, xm + hw, y + t));
                }
            }
        }
    }
    FloorPlan {
        rooms,
        doors,
        wall_thickness: t,
        z_floor,
        height,
    }
}
