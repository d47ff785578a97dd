//! Command-line and HTTP surface over `taskgen-core`: data loading,
//! model specs, the query API and a wire-protocol simulated model.

pub mod api;
pub mod data;
pub mod jobs;
pub mod models;
pub mod wire;
