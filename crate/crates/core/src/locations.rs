//! The location layer: compact groups of nearby objects inside a room.
//!
//! Locations come either from the built-in geometric detector, which runs on
//! a point cloud partitioned into objects, or from externally produced BEV
//! masks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::rle::Rle;
use crate::geometry::{
    alpha_shape, dbscan, polygon_compactness, BinaryMask, GeometryError, GridFrame, PointCloud, Polygon2D, NOISE,
};
use crate::graph::{NodeId, RoomNode};
use crate::llm::ChatClient;
use crate::prompts::PromptSet;
use crate::tagging::{ask_tag, UNKNOWN_LOCATION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightBand {
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl Default for HeightBand {
    fn default() -> Self {
        Self {
            alpha_min: 0.05,
            alpha_max: 0.85,
        }
    }
}

impl HeightBand {
    pub fn new(alpha_min: f64, alpha_max: f64) -> Result<Self, LocationError> {
        let band = Self { alpha_min, alpha_max };
        band.validate()?;
        Ok(band)
    }

    fn validate(&self) -> Result<(), LocationError> {
        if !(0.0 <= self.alpha_min && self.alpha_min < self.alpha_max && self.alpha_max <= 1.0) {
            return Err(LocationError::InvalidParameter(format!(
                "height band ({}, {})",
                self.alpha_min, self.alpha_max
            )));
        }
        Ok(())
    }

    /// Absolute z limits for the reference range `[b_min, b_max]`.
    pub fn limits(&self, b_min: f64, b_max: f64) -> (f64, f64) {
        let span = b_max - b_min;
        (b_min + self.alpha_min * span, b_min + self.alpha_max * span)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocationParams {
    pub band: HeightBand,
    pub eps: f64,
    pub min_pts: usize,
    /// Minimum number of objects per location (c).
    pub min_objects: usize,
    /// Minimum compactness 4πS/PR² (C).
    pub compactness_min: f64,
    pub min_area: f64,
    pub alpha: f64,
}

impl Default for LocationParams {
    fn default() -> Self {
        Self {
            band: HeightBand::default(),
            eps: 0.5,
            min_pts: 10,
            min_objects: 2,
            compactness_min: 0.3,
            min_area: 0.25,
            alpha: 0.5,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocationError {
    #[error("no points inside the height band")]
    EmptyBand,
    #[error("point cloud has no object partition")]
    MissingPartition,
    #[error("mask file frame {found} does not match floor frame {expected}")]
    FrameMismatch { expected: String, found: String },
    #[error("mask file is for floor {found}, expected floor {expected}")]
    FloorMismatch { expected: usize, found: usize },
    #[error("mask file: {0}")]
    ParseError(String),
    #[error("invalid location parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Points with `b_min + α_min·(b_max − b_min) ≤ z ≤ b_min + α_max·(b_max − b_min)`,
/// where the reference range is the cloud's own z-range unless given.
pub fn height_band_filter(
    cloud: &PointCloud,
    band: HeightBand,
    reference: Option<(f64, f64)>,
) -> Result<PointCloud, LocationError> {
    band.validate()?;
    let (b_min, b_max) = match reference {
        Some(r) => r,
        None => cloud.z_range().ok_or(LocationError::EmptyBand)?,
    };
    let (lo, hi) = band.limits(b_min, b_max);
    let out = cloud.filter(|_, p| p[2] >= lo && p[2] <= hi);
    if out.is_empty() {
        return Err(LocationError::EmptyBand);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectedLocation {
    pub polygon: Polygon2D,
    /// Objects whose points form the cluster, ascending.
    pub object_ids: Vec<u32>,
    /// Band-filtered points of the cluster.
    pub cloud: PointCloud,
}

/// Cluster label per point after moving every object wholesale into the
/// cluster that holds the plurality of its clustered points (ties to the
/// lower cluster). Objects with only noise points stay noise.
pub fn reassign_objects(labels: &[i32], object_ids: &[u32]) -> Vec<i32> {
    let mut votes: BTreeMap<u32, BTreeMap<i32, usize>> = BTreeMap::new();
    for (&l, &o) in labels.iter().zip(object_ids) {
        if l != NOISE {
            *votes.entry(o).or_default().entry(l).or_default() += 1;
        }
    }
    let winner: BTreeMap<u32, i32> = votes
        .into_iter()
        .map(|(o, v)| {
            let mut best = (NOISE, 0usize);
            for (l, n) in v {
                if n > best.1 {
                    best = (l, n);
                }
            }
            (o, best.0)
        })
        .collect();
    object_ids.iter().map(|o| winner.get(o).copied().unwrap_or(NOISE)).collect()
}

/// The geometric location detector. `reference` overrides the z-range the
/// height band is measured against.
pub fn detect_locations_geometric(
    cloud: &PointCloud,
    params: &LocationParams,
    reference: Option<(f64, f64)>,
) -> Result<Vec<DetectedLocation>, LocationError> {
    if cloud.object_ids().is_none() {
        return Err(LocationError::MissingPartition);
    }
    if !(params.eps > 0.0) || params.min_pts == 0 {
        return Err(LocationError::InvalidParameter(format!("eps {} min_pts {}", params.eps, params.min_pts)));
    }
    let banded = match height_band_filter(cloud, params.band, reference) {
        Ok(c) => c,
        Err(LocationError::EmptyBand) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let ids = banded.object_ids().unwrap();
    let raw = dbscan(banded.points(), params.eps, params.min_pts);
    let labels = reassign_objects(&raw, ids);
    let n_clusters = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = Vec::new();
    for cluster in 0..n_clusters {
        let members = banded.filter(|i, _| labels[i] == cluster);
        if members.is_empty() {
            continue;
        }
        let mut objects: Vec<u32> = members.object_ids().unwrap().to_vec();
        objects.sort_unstable();
        objects.dedup();
        if objects.len() < params.min_objects {
            continue;
        }
        let xy: Vec<[f64; 2]> = members.points().iter().map(|p| [p[0], p[1]]).collect();
        let polygon = match alpha_shape(&xy, params.alpha) {
            Ok(mut rings) if !rings.is_empty() => rings.swap_remove(0),
            Ok(_) | Err(GeometryError::DegenerateCluster(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        let area = polygon.area();
        let compactness = polygon_compactness(&polygon)?;
        if area < params.min_area || compactness < params.compactness_min {
            log::info!("cluster {cluster} dropped: area {area:.2} m², compactness {compactness:.3}");
            continue;
        }
        out.push(DetectedLocation {
            polygon,
            object_ids: objects,
            cloud: members,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskFrame {
    pub h: usize,
    pub w: usize,
    pub meters_per_pixel: f64,
    pub origin_xy: [f64; 2],
}

impl From<GridFrame> for MaskFrame {
    fn from(f: GridFrame) -> Self {
        Self {
            h: f.height,
            w: f.width,
            meters_per_pixel: f.meters_per_pixel,
            origin_xy: f.origin_xy,
        }
    }
}

/// Location-mask exchange file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskFile {
    pub floor: usize,
    pub frame: MaskFrame,
    pub masks: Vec<Rle>,
}

impl MaskFile {
    pub fn new(floor: usize, frame: GridFrame, masks: &[BinaryMask]) -> Self {
        Self {
            floor,
            frame: frame.into(),
            masks: masks.iter().map(|m| Rle::encode(&m.values)).collect(),
        }
    }
}

pub fn parse_location_masks(text: &str, floor_index: usize, frame: GridFrame) -> Result<Vec<BinaryMask>, LocationError> {
    let file: MaskFile = serde_json::from_str(text).map_err(|e| LocationError::ParseError(e.to_string()))?;
    if file.floor != floor_index {
        return Err(LocationError::FloorMismatch {
            expected: floor_index,
            found: file.floor,
        });
    }
    let f = file.frame;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
    if f.h != frame.height
        || f.w != frame.width
        || !close(f.meters_per_pixel, frame.meters_per_pixel)
        || !close(f.origin_xy[0], frame.origin_xy[0])
        || !close(f.origin_xy[1], frame.origin_xy[1])
    {
        return Err(LocationError::FrameMismatch {
            expected: format!("{}×{} @ {} m/px from {:?}", frame.height, frame.width, frame.meters_per_pixel, frame.origin_xy),
            found: format!("{}×{} @ {} m/px from {:?}", f.h, f.w, f.meters_per_pixel, f.origin_xy),
        });
    }
    file.masks
        .iter()
        .enumerate()
        .map(|(i, rle)| {
            let values = rle
                .decode(frame.len())
                .map_err(|e| LocationError::ParseError(format!("mask {i}: {e}")))?;
            Ok(BinaryMask::from_values(frame, values)?)
        })
        .collect()
}

pub fn ingest_location_masks(path: &Path, floor_index: usize, frame: GridFrame) -> Result<Vec<BinaryMask>, LocationError> {
    let text = std::fs::read_to_string(path).map_err(|e| LocationError::ParseError(format!("{}: {e}", path.display())))?;
    parse_location_masks(&text, floor_index, frame)
}

/// Outline of a raster mask: the alpha shape of its cell centers, largest ring.
pub fn mask_polygon(mask: &BinaryMask, alpha: f64) -> Result<Polygon2D, LocationError> {
    let f = mask.frame;
    let mut pts = Vec::new();
    for r in 0..f.height {
        for c in 0..f.width {
            if mask.get(r, c) {
                pts.push(f.cell_center(r, c));
            }
        }
    }
    let mut rings = alpha_shape(&pts, alpha)?;
    if rings.is_empty() {
        return Err(GeometryError::DegenerateCluster("mask has no area".into()).into());
    }
    Ok(rings.swap_remove(0))
}

/// Room overlapping the location mask the most (ties to the lower id); when
/// none overlaps, the room whose mask centroid is nearest.
pub fn assign_location_room<'a>(mask: &BinaryMask, rooms: impl IntoIterator<Item = &'a RoomNode> + Clone) -> Option<NodeId> {
    let mut best: Option<(NodeId, usize)> = None;
    for r in rooms.clone() {
        let n = mask.intersection_count(&r.mask).unwrap_or(0);
        if n > 0 && best.is_none_or(|(id, m)| n > m || (n == m && r.id < id)) {
            best = Some((r.id, n));
        }
    }
    if let Some((id, _)) = best {
        return Some(id);
    }
    let c = mask.centroid()?;
    let mut nearest: Option<(NodeId, f64)> = None;
    for r in rooms {
        if let Some(rc) = r.mask.centroid() {
            let d = (rc[0] - c[0]).hypot(rc[1] - c[1]);
            if nearest.is_none_or(|(id, m)| d < m || (d == m && r.id < id)) {
                nearest = Some((r.id, d));
            }
        }
    }
    if let Some((id, _)) = nearest {
        log::warn!("location overlaps no room; attached to nearest room {id}");
    }
    nearest.map(|(id, _)| id)
}

/// Location type from the tags of the objects it holds.
pub fn assign_location_tag(object_tags: &[String], llm: &dyn ChatClient, prompts: &PromptSet) -> String {
    ask_tag(&prompts.location_tag, object_tags, UNKNOWN_LOCATION, llm, prompts)
}
