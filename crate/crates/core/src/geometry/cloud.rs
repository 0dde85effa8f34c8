use serde::{Deserialize, Serialize};

use super::{Box3D, GeometryError, Result};

pub type Point3 = [f64; 3];

/// Points in meters, z up, with an optional per-point object partition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<Point3>,
    object_id: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        check_finite(&points)?;
        Ok(Self {
            points,
            object_id: None,
        })
    }

    pub fn with_object_ids(points: Vec<Point3>, object_id: Vec<u32>) -> Result<Self> {
        check_finite(&points)?;
        if object_id.len() != points.len() {
            return Err(GeometryError::InvalidCloud(format!(
                "object_id has {} entries for {} points",
                object_id.len(),
                points.len()
            )));
        }
        Ok(Self {
            points,
            object_id: Some(object_id),
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn object_ids(&self) -> Option<&[u32]> {
        self.object_id.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps the points for which `keep(index, point)` holds, carrying labels along.
    pub fn filter<F>(&self, mut keep: F) -> PointCloud
    where
        F: FnMut(usize, &Point3) -> bool,
    {
        let mut points = Vec::new();
        let mut ids = self.object_id.as_ref().map(|_| Vec::new());
        for (i, p) in self.points.iter().enumerate() {
            if keep(i, p) {
                points.push(*p);
                if let (Some(out), Some(src)) = (ids.as_mut(), self.object_id.as_ref()) {
                    out.push(src[i]);
                }
            }
        }
        PointCloud {
            points,
            object_id: ids,
        }
    }

    /// Appends `other`; the partition is kept only if both sides carry one.
    pub fn extend(&mut self, other: &PointCloud) {
        self.object_id = match (self.points.is_empty(), self.object_id.take(), &other.object_id) {
            (true, _, theirs) => theirs.clone(),
            (false, Some(mut ours), Some(theirs)) => {
                ours.extend_from_slice(theirs);
                Some(ours)
            }
            _ => None,
        };
        self.points.extend_from_slice(&other.points);
    }

    pub fn z_range(&self) -> Option<(f64, f64)> {
        let mut it = self.points.iter().map(|p| p[2]);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), z| (lo.min(z), hi.max(z))))
    }

    pub fn bounding_box(&self) -> Option<Box3D> {
        Box3D::enclosing(&self.points)
    }
}

fn check_finite(points: &[Point3]) -> Result<()> {
    if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
        return Err(GeometryError::InvalidCloud(format!(
            "point {i} has a non-finite coordinate"
        )));
    }
    Ok(())
}
