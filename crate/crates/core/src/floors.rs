//! Floor slabs from the height histogram of the whole scene.
//!
//! Pipeline: histogram, dominant peaks, 1-D DBSCAN over peak heights, the two
//! tallest peaks inside each cluster, then consecutive pairing of the sorted
//! survivors into (floor, ceiling) boundaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, build_height_histogram, find_peaks, GeometryError, Peak, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FloorParams {
    pub bin_h: f64,
    pub delta_f: f64,
    pub p_h: f64,
    pub peak_cluster_eps: f64,
    pub peak_cluster_min_pts: usize,
    /// Pair a dangling last peak with the cloud's top instead of failing.
    pub force_extend: bool,
}

impl Default for FloorParams {
    fn default() -> Self {
        Self {
            bin_h: 0.01,
            delta_f: 0.2,
            p_h: 0.9,
            peak_cluster_eps: 0.5,
            peak_cluster_min_pts: 1,
            force_extend: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloorSlab {
    pub index: usize,
    pub z_low: f64,
    pub z_high: f64,
    pub cloud: PointCloud,
    pub tag: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FloorError {
    #[error("no floor boundaries found")]
    NoFloors,
    #[error("{} boundary peaks survived (odd); heights: {}", .peaks.len(), fmt_peaks(.peaks))]
    UnpairedBoundary { peaks: Vec<Peak> },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn fmt_peaks(peaks: &[Peak]) -> String {
    peaks
        .iter()
        .map(|p| format!("{:.3} m ({} pts)", p.z_center, p.height))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn floor_tag(index: usize) -> String {
    format!("floor {index}")
}

/// Boundary peaks that survive per-cluster selection, sorted by height.
pub fn boundary_peaks(cloud: &PointCloud, params: &FloorParams) -> Result<Vec<Peak>, FloorError> {
    let hist = build_height_histogram(cloud, params.bin_h)?;
    let peaks = match find_peaks(&hist, params.delta_f, params.p_h) {
        Ok(p) => p,
        Err(GeometryError::NoPeaks) => return Err(FloorError::NoFloors),
        Err(e) => return Err(e.into()),
    };
    let zs: Vec<[f64; 1]> = peaks.iter().map(|p| [p.z_center]).collect();
    let labels = geometry::dbscan(&zs, params.peak_cluster_eps, params.peak_cluster_min_pts);
    let n_clusters = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut kept: Vec<Peak> = Vec::new();
    for cluster in 0..n_clusters {
        let mut members: Vec<Peak> = peaks
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == cluster)
            .map(|(p, _)| *p)
            .collect();
        members.sort_by(|a, b| b.height.cmp(&a.height).then(a.bin_index.cmp(&b.bin_index)));
        kept.extend(members.into_iter().take(2));
    }
    // noise peaks (possible only with min_pts > 1) are boundaries of their own
    kept.extend(
        peaks
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == geometry::NOISE)
            .map(|(p, _)| *p),
    );
    kept.sort_by_key(|p| p.bin_index);
    Ok(kept)
}

pub fn segment_floors(cloud: &PointCloud, params: &FloorParams) -> Result<Vec<FloorSlab>, FloorError> {
    let hist = build_height_histogram(cloud, params.bin_h)?;
    let mut peaks = boundary_peaks(cloud, params)?;
    if peaks.is_empty() {
        return Err(FloorError::NoFloors);
    }
    let mut top_override = None;
    if peaks.len() % 2 == 1 {
        if !params.force_extend {
            return Err(FloorError::UnpairedBoundary { peaks });
        }
        let last = *peaks.last().unwrap();
        let (_, z_max) = cloud.z_range().ok_or(GeometryError::EmptyInput)?;
        if z_max <= hist.bin_high(last.bin_index) {
            return Err(FloorError::UnpairedBoundary { peaks });
        }
        log::warn!(
            "odd boundary count; pairing peak at {:.3} m with cloud top {:.3} m",
            last.z_center,
            z_max
        );
        top_override = Some(z_max);
        peaks.push(last);
    }
    let mut slabs = Vec::with_capacity(peaks.len() / 2);
    for (index, pair) in peaks.chunks(2).enumerate() {
        let z_low = hist.bin_low(pair[0].bin_index);
        let mut z_high = hist.bin_high(pair[1].bin_index);
        if index == peaks.len() / 2 - 1 {
            if let Some(top) = top_override {
                z_high = top;
            }
        }
        let slab_cloud = cloud.filter(|_, p| p[2] >= z_low && p[2] <= z_high);
        slabs.push(FloorSlab {
            index,
            z_low,
            z_high,
            cloud: slab_cloud,
            tag: floor_tag(index),
        });
    }
    Ok(slabs)
}
