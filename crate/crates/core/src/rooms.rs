//! Room segmentation on a floor's bird's-eye view.
//!
//! Tall structure in the max-height BEV becomes the wall mask; the distance
//! field from walls is split by Otsu into room cores, and a priority flood
//! grows each core out to the walls.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::floors::FloorSlab;
use crate::geometry::{
    connected_components, euclidean_distance_field, otsu_threshold, project_bev_in_frame, watershed, BinaryMask,
    GeometryError, GridFrame, LabelGrid, PointCloud,
};
use crate::graph::{NodeId, RoomNode};
use crate::llm::ChatClient;
use crate::prompts::PromptSet;
use crate::tagging::{ask_tag, UNKNOWN_ROOM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoomParams {
    pub delta_wall: f64,
    pub meters_per_pixel: f64,
    /// Points this close below the slab top are ceiling and stay out of the BEV.
    pub ceiling_clearance: f64,
    /// Wall components smaller than this many cells are treated as clutter.
    pub min_wall_pixels: usize,
    pub min_seed_pixels: usize,
    pub min_room_area: f64,
    /// Share of a region's cells that must hold points.
    pub min_observed_fraction: f64,
}

impl Default for RoomParams {
    fn default() -> Self {
        Self {
            delta_wall: 0.5,
            meters_per_pixel: 0.05,
            ceiling_clearance: 0.15,
            min_wall_pixels: 4,
            min_seed_pixels: 4,
            min_room_area: 1.0,
            min_observed_fraction: 0.5,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoomError {
    #[error("no wall pixels on floor {0}")]
    NoWalls(usize),
    #[error("no room seeds on floor {0}")]
    NoSeeds(usize),
    #[error("invalid room parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Intermediate rasters, kept for inspection and tests.
#[derive(Debug, Clone)]
pub struct RoomRasters {
    pub frame: GridFrame,
    pub occupancy: BinaryMask,
    pub walls: BinaryMask,
    pub seeds: LabelGrid,
    pub regions: LabelGrid,
}

/// Points below the ceiling band.
pub fn bev_cloud(floor: &FloorSlab, clearance: f64) -> PointCloud {
    let top = floor.z_high - clearance;
    floor.cloud.filter(|_, p| p[2] < top)
}

fn drop_small(mask: &BinaryMask, min_pixels: usize) -> BinaryMask {
    if min_pixels <= 1 {
        return mask.clone();
    }
    let comps = connected_components(mask, true);
    let mut sizes = vec![0usize; comps.max_label() as usize + 1];
    for &l in &comps.labels {
        sizes[l as usize] += 1;
    }
    BinaryMask {
        frame: mask.frame,
        values: comps.labels.iter().map(|&l| l != 0 && sizes[l as usize] >= min_pixels).collect(),
    }
}

/// Seeds: 8-connected Otsu components of at least `min_pixels`, relabeled 1.. in raster order.
fn seed_labels(seed_mask: &BinaryMask, min_pixels: usize) -> LabelGrid {
    let comps = connected_components(seed_mask, true);
    let mut sizes = vec![0usize; comps.max_label() as usize + 1];
    for &l in &comps.labels {
        sizes[l as usize] += 1;
    }
    let mut remap = vec![0u32; sizes.len()];
    let mut next = 0;
    for l in 1..sizes.len() {
        if sizes[l] >= min_pixels {
            next += 1;
            remap[l] = next;
        }
    }
    LabelGrid {
        frame: comps.frame,
        labels: comps.labels.iter().map(|&l| remap[l as usize]).collect(),
    }
}

pub fn room_rasters(floor: &FloorSlab, frame: GridFrame, params: &RoomParams) -> Result<RoomRasters, RoomError> {
    if !(params.delta_wall > 0.0 && params.delta_wall < 1.0) {
        return Err(RoomError::InvalidParameter(format!("delta_wall = {}", params.delta_wall)));
    }
    let cloud = bev_cloud(floor, params.ceiling_clearance);
    let bev = project_bev_in_frame(&cloud, frame)?;
    let walls = drop_small(&bev.threshold(params.delta_wall), params.min_wall_pixels);
    let edf = match euclidean_distance_field(&walls) {
        Ok(f) => f,
        Err(GeometryError::NoWalls) => return Err(RoomError::NoWalls(floor.index)),
        Err(e) => return Err(e.into()),
    };
    let otsu = match otsu_threshold(&edf) {
        Ok(o) => o,
        Err(GeometryError::DegenerateField) => return Err(RoomError::NoSeeds(floor.index)),
        Err(e) => return Err(e.into()),
    };
    let seeds = seed_labels(&otsu.mask, params.min_seed_pixels);
    let regions = match watershed(&edf, &seeds, &walls) {
        Ok(r) => r,
        Err(GeometryError::NoSeeds) => return Err(RoomError::NoSeeds(floor.index)),
        Err(e) => return Err(e.into()),
    };
    Ok(RoomRasters {
        frame,
        occupancy: bev.occupancy(),
        walls,
        seeds,
        regions,
    })
}

/// Untagged rooms of one floor, numbered from 0 in seed order. Regions that
/// are too small or mostly unobserved are discarded.
pub fn segment_rooms(floor: &FloorSlab, frame: GridFrame, params: &RoomParams) -> Result<Vec<RoomNode>, RoomError> {
    let rasters = room_rasters(floor, frame, params)?;
    let mut rooms = Vec::new();
    for label in 1..=rasters.regions.max_label() {
        let mask = rasters.regions.mask_of(label);
        let cells = mask.count();
        if cells == 0 {
            continue;
        }
        let area = cells as f64 * frame.cell_area();
        let observed = mask.intersection_count(&rasters.occupancy)? as f64 / cells as f64;
        if area < params.min_room_area {
            log::info!("floor {}: region {label} dropped, area {area:.2} m²", floor.index);
            continue;
        }
        if observed < params.min_observed_fraction {
            log::info!("floor {}: region {label} dropped, {:.0}% observed", floor.index, observed * 100.0);
            continue;
        }
        let cloud = floor.cloud.filter(|_, p| mask.contains_xy(p[0], p[1]));
        let Some(bbox) = cloud.bounding_box() else {
            continue;
        };
        rooms.push(RoomNode {
            id: rooms.len() as NodeId,
            floor_index: floor.index as NodeId,
            mask,
            cloud,
            bbox,
            tag: String::new(),
        });
    }
    Ok(rooms)
}

/// Room type from the tags of the objects and locations it contains.
pub fn assign_room_tag(contents: &[String], llm: &dyn ChatClient, prompts: &PromptSet) -> String {
    ask_tag(&prompts.room_tag, contents, UNKNOWN_ROOM, llm, prompts)
}
