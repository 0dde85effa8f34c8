//! Numeric and geometric kernels shared by every layer builder.
//!
//! Everything in here is a pure function over immutable inputs. The raster
//! types ([`BevImage`], [`BinaryMask`], [`DistanceField`]) share a
//! [`GridFrame`] that maps cells to metric `(x, y)` coordinates.

mod boxes;
mod cloud;
mod dbscan;
mod edf;
mod grid;
mod histogram;
pub mod io;
mod otsu;
mod polygon;
pub mod rle;
mod watershed;

pub use boxes::{box3d_iou, Box3D};
pub use cloud::{Point3, PointCloud};
pub use dbscan::{dbscan, NOISE};
pub use edf::euclidean_distance_field;
pub use grid::{
    connected_components, mask_iou, project_bev, project_bev_in_frame, BevImage, BinaryMask,
    DistanceField, GridFrame, LabelGrid,
};
pub use histogram::{build_height_histogram, find_peaks, HeightHistogram, Peak};
pub use otsu::{otsu_threshold, OtsuSeeds, OTSU_BINS};
pub use polygon::{alpha_shape, convex_hull, polygon_compactness, Polygon2D};
pub use watershed::watershed;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),
    #[error("histogram has no peaks")]
    NoPeaks,
    #[error("mask has no wall pixels")]
    NoWalls,
    #[error("field is constant, cannot threshold")]
    DegenerateField,
    #[error("no seed components")]
    NoSeeds,
    #[error("degenerate cluster: {0}")]
    DegenerateCluster(String),
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),
    #[error("IoU undefined for two empty inputs")]
    UndefinedIoU,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;
