//! The object layer: per-frame detections lifted to 3D and merged across views.

mod aggregate;
mod frames;

pub use aggregate::{aggregate_objects, AggregateParams};
pub use frames::{
    backproject_depth, backproject_detection, load_depth_png, load_frame_detections, save_depth_png, transform, DepthImage,
    Detection, FrameDetections, Intrinsics, Pose,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Box3D, PointCloud};

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectFragment {
    pub frame_id: u32,
    pub tag: String,
    pub cloud: PointCloud,
    pub bbox: Box3D,
}

#[derive(Debug, Error)]
pub enum ObjectError {
    #[error("frame {frame_id}, detection {index}: no valid depth under the mask")]
    EmptyFragment { frame_id: u32, index: usize },
    #[error("frame {frame_id}: {msg}")]
    InvalidFrame { frame_id: u32, msg: String },
    #[error("{path}: {msg}")]
    File { path: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestParams {
    pub score_min: f64,
    pub min_fragment_points: usize,
}

impl Default for IngestParams {
    fn default() -> Self {
        Self {
            score_min: 0.3,
            min_fragment_points: 20,
        }
    }
}

/// Fragments of one frame in detection order, after the score and size filters.
pub fn frame_fragments(
    frame: &FrameDetections,
    depth: &DepthImage,
    params: &IngestParams,
) -> Result<Vec<ObjectFragment>, ObjectError> {
    frame.validate()?;
    let mut out = Vec::new();
    for (index, det) in frame.detections.iter().enumerate() {
        if det.score < params.score_min {
            continue;
        }
        match backproject_detection(det, depth, &frame.intrinsics, &frame.pose, frame.depth_scale) {
            Ok(mut f) => {
                if f.cloud.len() < params.min_fragment_points {
                    log::debug!("frame {}, detection {index}: {} points, dropped", frame.frame_id, f.cloud.len());
                    continue;
                }
                f.frame_id = frame.frame_id;
                out.push(f);
            }
            Err(ObjectError::EmptyFragment { .. }) => {
                log::debug!("frame {}, detection {index}: no valid depth", frame.frame_id);
            }
            Err(ObjectError::InvalidFrame { msg, .. }) => {
                return Err(ObjectError::InvalidFrame {
                    frame_id: frame.frame_id,
                    msg: format!("detection {index}: {msg}"),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
