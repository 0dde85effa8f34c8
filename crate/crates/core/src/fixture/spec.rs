//! Generator input: storeys, rooms with their object tags, locations, and
//! rendering settings. Object sizes come from a built-in catalog.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationSpec {
    pub tag: String,
    pub objects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    pub tag: String,
    /// Free-standing objects, kept apart from each other and from locations.
    #[serde(default)]
    pub objects: Vec<String>,
    #[serde(default)]
    pub locations: Vec<LocationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreySpec {
    pub z_floor: f64,
    pub height: f64,
    /// Rooms are laid out in one row along x.
    pub room_size: [f64; 2],
    pub rooms: Vec<RoomSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    /// Camera height above the floor.
    pub mount_height: f64,
    /// Distance of the corner cameras from the room's inner corners.
    pub corner_inset: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            width: 160,
            height: 120,
            fx: 100.0,
            fy: 100.0,
            mount_height: 1.5,
            corner_inset: 0.35,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSpec {
    pub seed: u64,
    pub building_tag: String,
    pub storeys: Vec<StoreySpec>,
    #[serde(default = "default_door")]
    pub door_width: f64,
    /// Share of the scene cloud that is uniform noise over its bounding box.
    #[serde(default)]
    pub noise_fraction: f64,
    /// Surface samples per square meter in the scene cloud.
    #[serde(default = "default_density")]
    pub surface_density: f64,
    #[serde(default)]
    pub camera: CameraSpec,
    pub queries: usize,
    /// Overrides applied to the default pipeline configuration.
    #[serde(default)]
    pub config: serde_json::Value,
}

fn default_door() -> f64 {
    1.0
}

fn default_density() -> f64 {
    800.0
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("fixture spec: {path}: {msg}")]
pub struct SpecError {
    pub path: String,
    pub msg: String,
}

fn fail(path: impl Into<String>, msg: impl Into<String>) -> SpecError {
    SpecError {
        path: path.into(),
        msg: msg.into(),
    }
}

/// Footprint `[x, y]` and height of a catalog object, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogEntry {
    pub size: [f64; 2],
    pub height: f64,
    /// Placed flush against a wall, thin side towards it.
    pub on_wall: bool,
}

const fn entry(x: f64, y: f64, h: f64) -> CatalogEntry {
    CatalogEntry {
        size: [x, y],
        height: h,
        on_wall: false,
    }
}

const fn wall_entry(x: f64, y: f64, h: f64) -> CatalogEntry {
    CatalogEntry {
        size: [x, y],
        height: h,
        on_wall: true,
    }
}

pub fn catalog(tag: &str) -> Option<CatalogEntry> {
    Some(match tag {
        "armchair" => entry(0.8, 0.8, 0.9),
        "bathtub" => entry(1.7, 0.8, 0.6),
        "bed" => entry(2.0, 1.6, 0.6),
        "bookshelf" => wall_entry(0.9, 0.35, 1.2),
        "cabinet" => wall_entry(0.8, 0.45, 1.0),
        "chair" => entry(0.5, 0.5, 0.9),
        "coffee table" => entry(1.0, 0.6, 0.45),
        "desk" => entry(1.4, 0.7, 0.75),
        "dresser" => wall_entry(1.0, 0.5, 0.9),
        "lamp" => entry(0.4, 0.4, 1.2),
        "nightstand" => entry(0.5, 0.45, 0.55),
        "office chair" => entry(0.6, 0.6, 1.0),
        "plant" => entry(0.45, 0.45, 1.0),
        "printer" => entry(0.5, 0.4, 0.4),
        "sink" => wall_entry(0.6, 0.5, 0.9),
        "sofa" => entry(2.0, 0.9, 0.85),
        "stool" => entry(0.4, 0.4, 0.65),
        "stove" => wall_entry(0.6, 0.6, 0.9),
        "table" => entry(1.2, 0.8, 0.75),
        "toilet" => entry(0.45, 0.7, 0.8),
        "towel rack" => wall_entry(0.6, 0.2, 1.1),
        "trash can" => entry(0.35, 0.35, 0.6),
        "tv" => entry(1.1, 0.4, 1.1),
        "vase" => entry(0.25, 0.25, 0.45),
        "wardrobe" => wall_entry(1.2, 0.6, 1.2),
        "window" => wall_entry(1.0, 0.08, 1.2),
        _ => return None,
    })
}

impl FixtureSpec {
    /// Two storeys with three and two rooms, 40 objects and 3 locations. The
    /// living room holds the only vase, next to a window.
    pub fn apartment(seed: u64) -> Self {
        let s = |v: &[&str]| v.iter().map(|t| t.to_string()).collect::<Vec<_>>();
        let room = |tag: &str, objects: &[&str], locations: Vec<LocationSpec>| RoomSpec {
            tag: tag.into(),
            objects: s(objects),
            locations,
        };
        let loc = |tag: &str, objects: &[&str]| LocationSpec {
            tag: tag.into(),
            objects: s(objects),
        };
        FixtureSpec {
            seed,
            building_tag: "apartment".into(),
            storeys: vec![
                StoreySpec {
                    z_floor: 0.0,
                    height: 2.8,
                    room_size: [5.5, 5.5],
                    rooms: vec![
                        room(
                            "living room",
                            &["armchair", "lamp", "plant", "vase", "window", "bookshelf"],
                            vec![loc("tv corner", &["sofa", "coffee table", "tv"])],
                        ),
                        room("kitchen", &["table", "stove", "sink", "cabinet", "chair", "trash can", "stool", "window"], vec![]),
                        room(
                            "bedroom",
                            &["wardrobe", "lamp", "window", "dresser"],
                            vec![loc("sleeping area", &["bed", "nightstand", "nightstand"])],
                        ),
                    ],
                },
                StoreySpec {
                    z_floor: 3.5,
                    height: 2.8,
                    room_size: [8.25, 5.5],
                    rooms: vec![
                        room(
                            "office",
                            &["bookshelf", "plant", "lamp", "window", "cabinet", "printer"],
                            vec![loc("work area", &["desk", "office chair"])],
                        ),
                        room("bathroom", &["toilet", "sink", "bathtub", "towel rack", "window", "trash can", "plant", "plant"], vec![]),
                    ],
                },
            ],
            door_width: 1.0,
            noise_fraction: 0.0,
            surface_density: 800.0,
            camera: CameraSpec::default(),
            queries: 20,
            config: serde_json::Value::Null,
        }
    }

    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: Self = serde_path_to_error::deserialize(de).map_err(|e| fail(e.path().to_string(), e.inner().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn object_count(&self) -> usize {
        self.storeys
            .iter()
            .flat_map(|s| &s.rooms)
            .map(|r| r.objects.len() + r.locations.iter().map(|l| l.objects.len()).sum::<usize>())
            .sum()
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.storeys.is_empty() {
            return Err(fail("storeys", "at least one storey is required"));
        }
        let mut prev_top = f64::NEG_INFINITY;
        for (i, st) in self.storeys.iter().enumerate() {
            let p = format!("storeys[{i}]");
            if st.rooms.is_empty() {
                return Err(fail(format!("{p}.rooms"), "a storey needs at least one room"));
            }
            if !(st.height > self.camera.mount_height && st.height.is_finite()) {
                return Err(fail(format!("{p}.height"), "must exceed the camera mount height"));
            }
            if !(st.room_size[0] >= 2.0 && st.room_size[1] >= 2.0) {
                return Err(fail(format!("{p}.room_size"), "rooms must be at least 2 m on each side"));
            }
            if st.z_floor <= prev_top + 0.2 {
                return Err(fail(format!("{p}.z_floor"), "storeys must be stacked with a gap of more than 0.2 m"));
            }
            prev_top = st.z_floor + st.height;
            for (j, r) in st.rooms.iter().enumerate() {
                let rp = format!("{p}.rooms[{j}]");
                if r.tag.trim().is_empty() {
                    return Err(fail(format!("{rp}.tag"), "empty tag"));
                }
                let tags = r.objects.iter().chain(r.locations.iter().flat_map(|l| &l.objects));
                for t in tags {
                    let c = catalog(t).ok_or_else(|| fail(&rp, format!("unknown object tag {t:?}")))?;
                    if c.height >= 0.5 * st.height {
                        return Err(fail(&rp, format!("{t:?} is too tall for the storey")));
                    }
                }
                for (k, l) in r.locations.iter().enumerate() {
                    if l.objects.len() < 2 {
                        return Err(fail(format!("{rp}.locations[{k}]"), "a location needs at least two objects"));
                    }
                }
            }
        }
        if self.storeys.iter().all(|s| s.rooms.iter().all(|r| r.objects.is_empty() && r.locations.is_empty())) {
            return Err(fail("storeys", "no objects"));
        }
        if !(0.0..0.5).contains(&self.noise_fraction) {
            return Err(fail("noise_fraction", "must be in [0, 0.5)"));
        }
        if !(self.door_width > 0.0) {
            return Err(fail("door_width", "must be positive"));
        }
        if !(self.surface_density > 0.0) {
            return Err(fail("surface_density", "must be positive"));
        }
        let c = &self.camera;
        if c.width == 0 || c.height == 0 || !(c.fx > 0.0 && c.fy > 0.0) {
            return Err(fail("camera", "bad intrinsics"));
        }
        if self.queries == 0 {
            return Err(fail("queries", "must be positive"));
        }
        Ok(())
    }
}
