use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("graph `{graph}`: {msg}")]
    Invalid { graph: String, msg: String },
    #[error("duplicate graph id `{0}`")]
    DuplicateGraph(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SgAttribute {
    #[serde(rename = "type")]
    pub kind: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SgObject {
    pub id: String,
    pub category: String,
    #[serde(default)]
    pub attributes: Vec<SgAttribute>,
}

impl SgObject {
    pub fn has(&self, kind: &str, value: &str) -> bool {
        self.attributes.iter().any(|a| a.kind == kind && a.value == value)
    }

    pub fn values_of<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.attributes
            .iter()
            .filter(move |a| a.kind == kind)
            .map(|a| a.value.as_str())
    }
}

pub const DEFAULT_FAMILY: &str = "relation";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SgRelation {
    pub source: String,
    pub predicate: String,
    pub target: String,
    /// Relation family such as "spatial" or "contact"; distractor predicates
    /// are drawn from the same family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    /// Inclusive frame interval during which the relation holds (video only;
    /// absent means the whole clip).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<[u32; 2]>,
}

impl SgRelation {
    pub fn family(&self) -> &str {
        self.family.as_deref().unwrap_or(DEFAULT_FAMILY)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SgAction {
    pub label: String,
    pub start: u32,
    pub end: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub graph_id: String,
    pub asset: String,
    #[serde(default)]
    pub objects: Vec<SgObject>,
    #[serde(default)]
    pub relations: Vec<SgRelation>,
    #[serde(default)]
    pub actions: Vec<SgAction>,
    /// Clip length; present exactly for video graphs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_frames: Option<u32>,
}

impl SceneGraph {
    pub fn is_video(&self) -> bool {
        self.num_frames.is_some()
    }

    pub fn object(&self, id: &str) -> Option<&SgObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Frame interval of a relation, defaulting to the whole clip.
    pub fn relation_frames(&self, r: &SgRelation) -> (u32, u32) {
        match (r.frames, self.num_frames) {
            (Some([s, e]), _) => (s, e),
            (None, Some(n)) => (0, n.saturating_sub(1)),
            (None, None) => (0, 0),
        }
    }

    /// Ids of objects categorized as the acting person in a video.
    pub fn person_ids(&self) -> Vec<&str> {
        self.objects
            .iter()
            .filter(|o| o.category == "person")
            .map(|o| o.id.as_str())
            .collect()
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |msg: String| CorpusError::Invalid {
            graph: self.graph_id.clone(),
            msg,
        };
        let mut ids = HashSet::new();
        for o in &self.objects {
            if !ids.insert(o.id.as_str()) {
                return Err(bad(format!("duplicate object id `{}`", o.id)));
            }
        }
        for r in &self.relations {
            for end in [&r.source, &r.target] {
                if !ids.contains(end.as_str()) {
                    return Err(bad(format!("relation `{}` references unknown object `{end}`", r.predicate)));
                }
            }
            if let Some([s, e]) = r.frames {
                if s > e {
                    return Err(bad(format!("relation `{}` has interval [{s},{e}]", r.predicate)));
                }
                if self.num_frames.is_some_and(|n| e >= n) {
                    return Err(bad(format!("relation `{}` ends after the clip", r.predicate)));
                }
            }
        }
        for a in &self.actions {
            if a.start > a.end {
                return Err(bad(format!("action `{}` has interval [{},{}]", a.label, a.start, a.end)));
            }
            match self.num_frames {
                Some(n) if a.end >= n => return Err(bad(format!("action `{}` ends after the clip", a.label))),
                None => return Err(bad("actions require num_frames".into())),
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct SceneGraphCorpus {
    graphs: Vec<SceneGraph>,
    index: HashMap<String, usize>,
}

impl SceneGraphCorpus {
    pub fn new(graphs: Vec<SceneGraph>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(graphs.len());
        for (i, g) in graphs.iter().enumerate() {
            g.validate()?;
            if index.insert(g.graph_id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateGraph(g.graph_id.clone()));
            }
        }
        Ok(Self { graphs, index })
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut graphs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let g: SceneGraph = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            graphs.push(g);
        }
        Self::new(graphs)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for g in &self.graphs {
            out.push_str(&serde_json::to_string(g).expect("graph serializes"));
            out.push('\n');
        }
        out
    }

    pub fn graphs(&self) -> &[SceneGraph] {
        &self.graphs
    }

    pub fn get(&self, id: &str) -> Option<&SceneGraph> {
        self.index.get(id).map(|&i| &self.graphs[i])
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Object categories across all graphs, sorted.
    pub fn categories(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .graphs
            .iter()
            .flat_map(|g| g.objects.iter().map(|o| o.category.as_str()))
            .collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Values of one attribute type across all graphs, sorted.
    pub fn attribute_values(&self, kind: &str) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .graphs
            .iter()
            .flat_map(|g| g.objects.iter().flat_map(|o| o.values_of(kind)))
            .collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Predicates of one relation family across all graphs, sorted.
    pub fn predicates(&self, family: &str) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .graphs
            .iter()
            .flat_map(|g| g.relations.iter())
            .filter(|r| r.family() == family)
            .map(|r| r.predicate.as_str())
            .collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn action_labels(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .graphs
            .iter()
            .flat_map(|g| g.actions.iter().map(|a| a.label.as_str()))
            .collect();
        set.into_iter().map(str::to_string).collect()
    }
}

pub fn load_corpus(path: &Path) -> Result<SceneGraphCorpus, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    SceneGraphCorpus::parse(&text)
}
