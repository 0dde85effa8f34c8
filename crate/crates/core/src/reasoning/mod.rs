//! Deductive hierarchical reasoning over a scene graph.
//!
//! A query is answered in sequential LLM calls: the floors, rooms and
//! locations related to it are selected top-down, each surviving room's
//! objects are split into targets and anchors, relations are computed for
//! those pairs only, and a final call picks one object id.

mod json;
mod pipeline;

pub use json::{parse_strict, repair_json, RepairBudget};
pub use pipeline::{
    ground, run_pipeline, select_related, select_targets_anchors, EnrichedGroup, GroundingOutcome, GroundingResult,
    GroupTrace, ReasoningConfig, Trace,
};

use std::fmt;

use thiserror::Error;

use crate::edges::EdgeError;
use crate::graph::NodeKind;
use crate::llm::LlmError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stage {
    SelectLayer(NodeKind),
    SelectTargets(u32),
    Ground,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::SelectLayer(k) => write!(f, "select_{}", k.plural()),
            Stage::SelectTargets(room) => write!(f, "select_targets:room_{room}"),
            Stage::Ground => f.write_str("ground"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ErrorKind {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("selection: {0}")]
    Selection(String),
    #[error("grounding: {0}")]
    Grounding(String),
    #[error("JSON repair failed; original {raw:?}, repaired {repaired:?}")]
    RepairFailed { raw: String, repaired: String },
    #[error(transparent)]
    Edge(#[from] EdgeError),
    #[error("graph has no objects")]
    EmptyGraph,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("stage {stage}: {kind}")]
pub struct ReasoningError {
    pub stage: String,
    pub kind: ErrorKind,
}

impl ReasoningError {
    pub fn new(stage: &Stage, kind: impl Into<ErrorKind>) -> Self {
        Self {
            stage: stage.to_string(),
            kind: kind.into(),
        }
    }
}
