use serde::{Deserialize, Serialize};

use super::{GeometryError, PointCloud, Result};

/// Metric placement of an `height × width` raster. Row index grows with y,
/// column index with x; cell `(r, c)` covers
/// `[ox + c·m, ox + (c+1)·m) × [oy + r·m, oy + (r+1)·m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub height: usize,
    pub width: usize,
    pub meters_per_pixel: f64,
    pub origin_xy: [f64; 2],
}

impl GridFrame {
    pub fn new(height: usize, width: usize, meters_per_pixel: f64, origin_xy: [f64; 2]) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(GeometryError::InvalidParameter("grid must be at least 1×1".into()));
        }
        if !(meters_per_pixel > 0.0) || !origin_xy.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidParameter(format!(
                "meters_per_pixel = {meters_per_pixel}"
            )));
        }
        Ok(Self {
            height,
            width,
            meters_per_pixel,
            origin_xy,
        })
    }

    /// Smallest frame anchored at the cloud's xy minimum that holds every point.
    pub fn covering(cloud: &PointCloud, meters_per_pixel: f64) -> Result<Self> {
        if cloud.is_empty() {
            return Err(GeometryError::EmptyInput);
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in cloud.points() {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let width = ((hi[0] - lo[0]) / meters_per_pixel).floor() as usize + 1;
        let height = ((hi[1] - lo[1]) / meters_per_pixel).floor() as usize + 1;
        Self::new(height, width, meters_per_pixel, lo)
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.origin_xy[0]) / self.meters_per_pixel).floor();
        let r = ((y - self.origin_xy[1]) / self.meters_per_pixel).floor();
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            return None;
        }
        Some((r as usize, c as usize))
    }

    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.origin_xy[0] + (col as f64 + 0.5) * self.meters_per_pixel,
            self.origin_xy[1] + (row as f64 + 0.5) * self.meters_per_pixel,
        ]
    }

    pub fn cell_area(&self) -> f64 {
        self.meters_per_pixel * self.meters_per_pixel
    }

    pub fn diagonal_pixels(&self) -> f64 {
        ((self.height * self.height + self.width * self.width) as f64).sqrt()
    }

    fn check_same(&self, other: &GridFrame) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return Err(GeometryError::ShapeMismatch(format!(
                "{}×{} vs {}×{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }

    /// 4- or 8-neighborhood of a cell, clipped at the border.
    pub fn neighbors(&self, idx: usize, eight: bool) -> impl Iterator<Item = usize> + '_ {
        const FOUR: [(i64, i64); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(i64, i64); 8] =
            [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        let offsets: &'static [(i64, i64)] = if eight { &EIGHT } else { &FOUR };
        let (r, c) = ((idx / self.width) as i64, (idx % self.width) as i64);
        offsets.iter().filter_map(move |(dr, dc)| {
            let (nr, nc) = (r + dr, c + dc);
            (nr >= 0 && nc >= 0 && nr < self.height as i64 && nc < self.width as i64)
                .then(|| nr as usize * self.width + nc as usize)
        })
    }
}

/// Min-max normalized per-cell maximum height.
#[derive(Debug, Clone, PartialEq)]
pub struct BevImage {
    pub frame: GridFrame,
    pub values: Vec<f64>,
    occupied: Vec<bool>,
}

impl BevImage {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.frame.index(row, col)]
    }

    /// Cells that received at least one point.
    pub fn occupancy(&self) -> BinaryMask {
        BinaryMask {
            frame: self.frame,
            values: self.occupied.clone(),
        }
    }

    /// Cells strictly above `threshold`.
    pub fn threshold(&self, threshold: f64) -> BinaryMask {
        BinaryMask {
            frame: self.frame,
            values: self.values.iter().map(|&v| v > threshold).collect(),
        }
    }
}

pub fn project_bev(cloud: &PointCloud, meters_per_pixel: f64) -> Result<BevImage> {
    let frame = GridFrame::covering(cloud, meters_per_pixel)?;
    project_bev_in_frame(cloud, frame)
}

/// Projects into a fixed frame; points outside it are ignored. When every
/// occupied cell has the same maximum the normalized image is all zeros.
pub fn project_bev_in_frame(cloud: &PointCloud, frame: GridFrame) -> Result<BevImage> {
    if cloud.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let mut max_z = vec![f64::NEG_INFINITY; frame.len()];
    for p in cloud.points() {
        if let Some((r, c)) = frame.cell_of(p[0], p[1]) {
            let i = frame.index(r, c);
            max_z[i] = max_z[i].max(p[2]);
        }
    }
    let occupied: Vec<bool> = max_z.iter().map(|z| z.is_finite()).collect();
    let (lo, hi) = max_z
        .iter()
        .filter(|z| z.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| (lo.min(z), hi.max(z)));
    let range = hi - lo;
    let values = max_z
        .iter()
        .map(|&z| {
            if !z.is_finite() || !(range > 0.0) {
                0.0
            } else {
                ((z - lo) / range).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(BevImage {
        frame,
        values,
        occupied,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub frame: GridFrame,
    pub values: Vec<bool>,
}

impl BinaryMask {
    pub fn new(frame: GridFrame) -> Self {
        Self {
            frame,
            values: vec![false; frame.len()],
        }
    }

    pub fn from_values(frame: GridFrame, values: Vec<bool>) -> Result<Self> {
        if values.len() != frame.len() {
            return Err(GeometryError::ShapeMismatch(format!(
                "{} values for a {}×{} frame",
                values.len(),
                frame.height,
                frame.width
            )));
        }
        Ok(Self { frame, values })
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.values[self.frame.index(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        let i = self.frame.index(row, col);
        self.values[i] = v;
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.values.iter().any(|&v| v)
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        self.frame
            .cell_of(x, y)
            .is_some_and(|(r, c)| self.get(r, c))
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> Result<usize> {
        self.frame.check_same(&other.frame)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| **a && **b)
            .count())
    }

    pub fn union_count(&self, other: &BinaryMask) -> Result<usize> {
        self.frame.check_same(&other.frame)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| **a || **b)
            .count())
    }

    pub fn and_not(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.frame.check_same(&other.frame)?;
        Ok(BinaryMask {
            frame: self.frame,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| *a && !*b)
                .collect(),
        })
    }

    pub fn or(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.frame.check_same(&other.frame)?;
        Ok(BinaryMask {
            frame: self.frame,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| *a || *b)
                .collect(),
        })
    }

    /// Mean metric position of the set cells.
    pub fn centroid(&self) -> Option<[f64; 2]> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for (i, _) in self.values.iter().enumerate().filter(|(_, v)| **v) {
            let c = self.frame.cell_center(i / self.frame.width, i % self.frame.width);
            sx += c[0];
            sy += c[1];
            n += 1;
        }
        (n > 0).then(|| [sx / n as f64, sy / n as f64])
    }

    pub fn iou(&self, other: &BinaryMask) -> Result<f64> {
        let union = self.union_count(other)?;
        if union == 0 {
            return Err(GeometryError::UndefinedIoU);
        }
        Ok(self.intersection_count(other)? as f64 / union as f64)
    }
}

/// `|a ∩ b| / |a ∪ b|`; undefined when both masks are empty.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.iou(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub frame: GridFrame,
    pub values: Vec<f64>,
}

impl DistanceField {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.frame.index(row, col)]
    }
}

/// Region labels; 0 means unassigned.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    pub frame: GridFrame,
    pub labels: Vec<u32>,
}

impl LabelGrid {
    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    pub fn mask_of(&self, label: u32) -> BinaryMask {
        BinaryMask {
            frame: self.frame,
            values: self.labels.iter().map(|&l| l == label).collect(),
        }
    }
}

/// Connected components labeled 1.. in raster order of their first cell.
pub fn connected_components(mask: &BinaryMask, eight: bool) -> LabelGrid {
    let frame = mask.frame;
    let mut labels = vec![0u32; frame.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..frame.len() {
        if !mask.values[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            for j in frame.neighbors(i, eight) {
                if mask.values[j] && labels[j] == 0 {
                    labels[j] = next;
                    stack.push(j);
                }
            }
        }
    }
    LabelGrid { frame, labels }
}
