pub mod geometry;
pub mod floors;
pub mod llm;
pub mod prompts;
pub mod tagging;
pub mod graph;
pub mod rooms;
pub mod fixture;
pub mod eval;
pub mod locations;
pub mod objects;
pub mod edges;
pub mod reasoning;
pub mod config;
pub mod pipeline;
pub mod export;
