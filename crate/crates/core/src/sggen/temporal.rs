use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::graph::SceneGraph;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemporalError {
    #[error("anchor action `{anchor}` occurs {count} times")]
    AmbiguousAnchor { anchor: String, count: usize },
    #[error("graph `{0}` is not a video graph")]
    NotVideo(String),
    #[error("unknown temporal relation `{0}`")]
    UnknownRelation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalRelation {
    Before,
    While,
    After,
}

impl TemporalRelation {
    pub const ALL: [TemporalRelation; 3] = [Self::Before, Self::While, Self::After];

    pub fn name(self) -> &'static str {
        match self {
            Self::Before => "before",
            Self::While => "while",
            Self::After => "after",
        }
    }

    pub fn parse(s: &str) -> Result<Self, TemporalError> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| TemporalError::UnknownRelation(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalReference {
    pub relation: TemporalRelation,
    pub anchor: String,
}

/// Inclusive frame interval selected by `reference`, or `None` when the
/// window is empty (e.g. "before" an action that starts on frame 0).
pub fn temporal_window(sg: &SceneGraph, reference: &TemporalReference) -> Result<Option<(u32, u32)>, TemporalError> {
    let frames = sg.num_frames.ok_or_else(|| TemporalError::NotVideo(sg.graph_id.clone()))?;
    let hits: Vec<_> = sg.actions.iter().filter(|a| a.label == reference.anchor).collect();
    if hits.len() != 1 {
        return Err(TemporalError::AmbiguousAnchor {
            anchor: reference.anchor.clone(),
            count: hits.len(),
        });
    }
    let a = hits[0];
    let last = frames.saturating_sub(1);
    Ok(match reference.relation {
        TemporalRelation::Before if a.start == 0 => None,
        TemporalRelation::Before => Some((0, a.start - 1)),
        TemporalRelation::While => Some((a.start, a.end)),
        TemporalRelation::After if a.end >= last => None,
        TemporalRelation::After => Some((a.end + 1, last)),
    })
}

/// Number of frames two inclusive intervals share.
pub fn overlap(a: (u32, u32), b: (u32, u32)) -> u32 {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    if lo > hi {
        0
    } else {
        hi - lo + 1
    }
}

pub fn covers(outer: (u32, u32), inner: (u32, u32)) -> bool {
    outer.0 <= inner.0 && inner.1 <= outer.1
}
