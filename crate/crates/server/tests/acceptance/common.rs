//! Helpers shared by the oracles. Nothing here calls into the code under
//! test except for reading its data types.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;
use taskgen_core::sggen::SceneGraph;
use taskgen_core::taxonomy::Taxonomy;

pub type Check = Result<String, String>;

/// Turns a failed condition into a criterion failure.
pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Transitive closure of a taxonomy, rebuilt from its edge list by BFS.
pub struct Closure {
    ancestors: BTreeMap<String, BTreeSet<String>>,
}

impl Closure {
    pub fn new(tax: &Taxonomy) -> Self {
        let mut parents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (child, parent) in tax.edges() {
            parents.entry(child).or_default().push(parent);
        }
        let mut ancestors = BTreeMap::new();
        for c in tax.concepts() {
            let mut seen = BTreeSet::new();
            let mut queue: Vec<&str> = parents.get(c).cloned().unwrap_or_default();
            while let Some(p) = queue.pop() {
                if seen.insert(p.to_string()) {
                    queue.extend(parents.get(p).cloned().unwrap_or_default());
                }
            }
            ancestors.insert(c.to_string(), seen);
        }
        Self { ancestors }
    }

    pub fn ancestors(&self, c: &str) -> BTreeSet<String> {
        self.ancestors.get(c).cloned().unwrap_or_default()
    }

    pub fn is_ancestor(&self, a: &str, b: &str) -> bool {
        self.ancestors.get(b).is_some_and(|s| s.contains(a))
    }

    /// Equal, or one an ancestor of the other.
    pub fn related(&self, a: &str, b: &str) -> bool {
        a == b || self.is_ancestor(a, b) || self.is_ancestor(b, a)
    }

    /// `c` is `of` or one of its descendants.
    pub fn is_a(&self, c: &str, of: &str) -> bool {
        c == of || self.is_ancestor(of, c)
    }
}

/// Node ids of `g` that bind the root of a serialized subgraph pattern.
pub fn pattern_matches(g: &SceneGraph, pattern: &Value) -> Vec<String> {
    g.objects
        .iter()
        .filter(|o| node_matches(g, &o.id, pattern))
        .map(|o| o.id.clone())
        .collect()
}

fn node_matches(g: &SceneGraph, id: &str, p: &Value) -> bool {
    let Some(obj) = g.objects.iter().find(|o| o.id == id) else {
        return false;
    };
    if let Some(c) = p.get("category").and_then(Value::as_str) {
        if obj.category != c {
            return false;
        }
    }
    for a in p.get("attributes").and_then(Value::as_array).into_iter().flatten() {
        let (kind, value) = (a["type"].as_str().unwrap_or(""), a["value"].as_str().unwrap_or(""));
        if !obj.attributes.iter().any(|x| x.kind == kind && x.value == value) {
            return false;
        }
    }
    for r in p.get("relations").and_then(Value::as_array).into_iter().flatten() {
        let pred = r["predicate"].as_str().unwrap_or("");
        let outgoing = r["direction"].as_str() == Some("out");
        let ok = g.relations.iter().any(|e| {
            let other = if outgoing && e.source == id {
                &e.target
            } else if !outgoing && e.target == id {
                &e.source
            } else {
                return false;
            };
            e.predicate == pred && node_matches(g, other, &r["node"])
        });
        if !ok {
            return false;
        }
    }
    true
}

/// Inclusive frame interval a relation holds on; absent means the whole clip.
pub fn relation_span(g: &SceneGraph, frames: Option<[u32; 2]>) -> (u32, u32) {
    match frames {
        Some([s, e]) => (s, e),
        None => (0, g.num_frames.unwrap_or(1) - 1),
    }
}

/// Window selected by a temporal reference to an action occurring once.
pub fn window(g: &SceneGraph, anchor: &str, temporal: &str) -> Option<(u32, u32)> {
    let hits: Vec<_> = g.actions.iter().filter(|a| a.label == anchor).collect();
    if hits.len() != 1 {
        return None;
    }
    let (start, end) = (hits[0].start, hits[0].end);
    let last = g.num_frames? - 1;
    match temporal {
        "before" if start > 0 => Some((0, start - 1)),
        "while" => Some((start, end)),
        "after" if end < last => Some((end + 1, last)),
        _ => None,
    }
}

/// Frames of `w` that fall inside `span`, counted one by one.
pub fn frames_inside(span: (u32, u32), w: (u32, u32)) -> u32 {
    (w.0..=w.1).filter(|f| span.0 <= *f && *f <= span.1).count() as u32
}

/// Number of pairwise non-conflicting candidates left once everything
/// related to the truth or a co-answer is removed.
pub fn isolated(tax: &Closure, pool: &BTreeSet<String>, truth: &str, also: &BTreeSet<String>) -> usize {
    let cands: Vec<&String> = pool
        .iter()
        .filter(|c| !tax.related(c, truth) && also.iter().all(|a| !tax.related(c, a)))
        .collect();
    cands
        .iter()
        .filter(|c| cands.iter().all(|d| c == &d || !tax.related(c, d)))
        .count()
}

/// Every plan of the listed generators, in generator order.
pub fn plans_of(
    registry: &taskgen_core::planspace::GeneratorRegistry,
    source: &taskgen_core::planspace::SourceData,
    generators: &[&str],
) -> Vec<taskgen_core::planspace::TaskPlan> {
    generators
        .iter()
        .flat_map(|g| {
            taskgen_core::planspace::enumerate_plans(registry, g, source)
                .unwrap_or_else(|e| panic!("{g}: {e}"))
                .into_rows()
        })
        .collect()
}
