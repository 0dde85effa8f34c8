use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ObjectError, ObjectFragment};
use crate::geometry::rle::Rle;
use crate::geometry::{Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Camera-to-world transform, row-major.
pub type Pose = [[f64; 4]; 4];

pub fn transform(pose: &Pose, p: Point3) -> Point3 {
    let mut out = [0.0; 3];
    for (r, o) in out.iter_mut().enumerate() {
        *o = pose[r][0] * p[0] + pose[r][1] * p[1] + pose[r][2] * p[2] + pose[r][3];
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detection {
    pub tag: String,
    pub score: f64,
    /// `[x, y, w, h]` in pixels.
    pub box2d: [u32; 4],
    /// Run-length mask over the row-major image grid.
    pub mask: Rle,
}

/// One frame's detections together with its camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameDetections {
    pub frame_id: u32,
    pub width: u32,
    pub height: u32,
    pub intrinsics: Intrinsics,
    pub pose: Pose,
    /// Meters per depth unit.
    pub depth_scale: f64,
    pub detections: Vec<Detection>,
}

impl FrameDetections {
    pub fn validate(&self) -> Result<(), ObjectError> {
        let bad = |msg: String| ObjectError::InvalidFrame {
            frame_id: self.frame_id,
            msg,
        };
        let i = &self.intrinsics;
        if !(i.fx > 0.0 && i.fy > 0.0) || !i.cx.is_finite() || !i.cy.is_finite() {
            return Err(bad(format!("bad intrinsics {i:?}")));
        }
        let last = self.pose[3];
        if (0..3).any(|k| last[k].abs() > 1e-9) || (last[3] - 1.0).abs() > 1e-9 {
            return Err(bad(format!("pose bottom row {last:?} is not (0, 0, 0, 1)")));
        }
        if self.pose.iter().flatten().any(|v| !v.is_finite()) {
            return Err(bad("non-finite pose".into()));
        }
        if !(self.depth_scale > 0.0) {
            return Err(bad(format!("depth_scale {}", self.depth_scale)));
        }
        let w = self.width as u64;
        for (k, d) in self.detections.iter().enumerate() {
            let [bx, by, bw, bh] = d.box2d.map(u64::from);
            for &[v, start, len] in &d.mask.0 {
                if v == 0 {
                    continue;
                }
                for idx in start..start + len {
                    let (u, row) = (idx % w, idx / w);
                    if u < bx || u >= bx + bw || row < by || row >= by + bh {
                        return Err(bad(format!("detection {k}: mask pixel ({u}, {row}) outside its box")));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn load_frame_detections(path: &Path) -> Result<FrameDetections, ObjectError> {
    let text = std::fs::read_to_string(path).map_err(|e| ObjectError::File {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| ObjectError::File {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// Raw depth units, row-major; 0 marks a missing reading.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u16>,
}

impl DepthImage {
    pub fn get(&self, u: u32, v: u32) -> u16 {
        self.data[(v * self.width + u) as usize]
    }
}

/// Reads a 16-bit grayscale PNG.
pub fn load_depth_png(path: &Path) -> Result<DepthImage, ObjectError> {
    let err = |msg: String| ObjectError::File {
        path: path.display().to_string(),
        msg,
    };
    let img = image::open(path).map_err(|e| err(e.to_string()))?;
    let image::DynamicImage::ImageLuma16(buf) = img else {
        return Err(err(format!("expected 16-bit grayscale depth, got {:?}", img.color())));
    };
    Ok(DepthImage {
        width: buf.width(),
        height: buf.height(),
        data: buf.into_raw(),
    })
}

pub fn save_depth_png(path: &Path, depth: &DepthImage) -> Result<(), ObjectError> {
    let buf = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(depth.width, depth.height, depth.data.clone())
        .ok_or_else(|| ObjectError::File {
            path: path.display().to_string(),
            msg: "buffer size does not match dimensions".into(),
        })?;
    buf.save(path).map_err(|e| ObjectError::File {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

fn camera_point(u: u32, v: u32, d: u16, intr: &Intrinsics, scale: f64) -> Point3 {
    let z = d as f64 * scale;
    [(u as f64 - intr.cx) * z / intr.fx, (v as f64 - intr.cy) * z / intr.fy, z]
}

/// World points of the valid depth pixels under a detection mask.
pub fn backproject_detection(
    det: &Detection,
    depth: &DepthImage,
    intr: &Intrinsics,
    pose: &Pose,
    depth_scale: f64,
) -> Result<ObjectFragment, ObjectError> {
    let n = depth.data.len();
    let mask = det.mask.decode(n).map_err(|e| ObjectError::InvalidFrame {
        frame_id: 0,
        msg: format!("mask: {e}"),
    })?;
    let mut pts = Vec::new();
    for (idx, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let d = depth.data[idx];
        if d == 0 {
            continue;
        }
        let (u, v) = (idx as u32 % depth.width, idx as u32 / depth.width);
        pts.push(transform(pose, camera_point(u, v, d, intr, depth_scale)));
    }
    if pts.is_empty() {
        return Err(ObjectError::EmptyFragment { frame_id: 0, index: 0 });
    }
    let cloud = PointCloud::new(pts).map_err(|e| ObjectError::InvalidFrame {
        frame_id: 0,
        msg: e.to_string(),
    })?;
    let bbox = cloud.bounding_box().expect("non-empty");
    Ok(ObjectFragment {
        frame_id: 0,
        tag: det.tag.clone(),
        cloud,
        bbox,
    })
}

/// Every valid pixel of a depth image, sampling one pixel in `stride` per axis.
pub fn backproject_depth(depth: &DepthImage, intr: &Intrinsics, pose: &Pose, depth_scale: f64, stride: u32) -> Vec<Point3> {
    let stride = stride.max(1);
    let mut pts = Vec::new();
    for v in (0..depth.height).step_by(stride as usize) {
        for u in (0..depth.width).step_by(stride as usize) {
            let d = depth.get(u, v);
            if d != 0 {
                pts.push(transform(pose, camera_point(u, v, d, intr, depth_scale)));
            }
        }
    }
    pts
}
