//! The single JSON configuration document and `key=value` overrides.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::floors::FloorParams;
use crate::llm::HttpConfig;
use crate::locations::LocationParams;
use crate::objects::{AggregateParams, IngestParams};
use crate::reasoning::ReasoningConfig;
use crate::rooms::RoomParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub building_tag: String,
    pub floors: FloorParams,
    pub rooms: RoomParams,
    pub locations: LocationParams,
    pub ingest: IngestParams,
    pub aggregate: AggregateParams,
    /// Pixel stride when the scene cloud is accumulated from depth frames.
    pub depth_stride: u32,
    pub llm: HttpConfig,
    pub reasoning: ReasoningConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            building_tag: "building".into(),
            floors: FloorParams::default(),
            rooms: RoomParams::default(),
            locations: LocationParams::default(),
            ingest: IngestParams::default(),
            aggregate: AggregateParams::default(),
            depth_stride: 4,
            llm: HttpConfig::default(),
            reasoning: ReasoningConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}: {msg}")]
    Invalid { path: String, msg: String },
    #[error("override {0:?} is not of the form key=value")]
    BadOverride(String),
    #[error("{0}")]
    Io(String),
}

impl PipelineConfig {
    pub fn from_value(v: Value) -> Result<Self, ConfigError> {
        serde_path_to_error::deserialize(v).map_err(|e| ConfigError::Invalid {
            path: e.path().to_string(),
            msg: e.inner().to_string(),
        })
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Defaults with `patch` merged over them; `null` leaves them unchanged.
    pub fn patched(patch: &Value) -> Result<Self, ConfigError> {
        let mut v = Self::default().to_value();
        if !patch.is_null() {
            merge(&mut v, patch.clone());
        }
        Self::from_value(v)
    }

    /// Loads `path` if given, then applies `overrides` in order. The result
    /// is validated as a whole, so an override naming an unknown key fails.
    pub fn load(path: Option<&std::path::Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut v = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Io(format!("{}: {e}", p.display())))?;
                let file: Value = serde_json::from_str(&text).map_err(|e| ConfigError::Invalid {
                    path: p.display().to_string(),
                    msg: e.to_string(),
                })?;
                // validate the file on its own so errors point at it
                Self::from_value(file.clone())?;
                let mut base = Self::default().to_value();
                merge(&mut base, file);
                base
            }
            None => Self::default().to_value(),
        };
        for o in overrides {
            apply_override(&mut v, o)?;
        }
        Self::from_value(v)
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, pv) in p {
                match b.get_mut(&k) {
                    Some(bv) => merge(bv, pv),
                    None => {
                        b.insert(k, pv);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// `a.b.c=value`, where value is parsed as JSON and taken as a string if
/// that fails.
pub fn apply_override(v: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::BadOverride(spec.into()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::BadOverride(spec.into()));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut cur = v;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match cur {
            Value::Object(o) => o,
            _ => {
                return Err(ConfigError::Invalid {
                    path: parts[..i].join("."),
                    msg: "not a table".into(),
                })
            }
        };
        if i + 1 == parts.len() {
            obj.insert((*part).to_owned(), value);
            return Ok(());
        }
        cur = obj.entry((*part).to_owned()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!()
}
