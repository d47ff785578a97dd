//! Concept DAG with is-a edges, plus the object catalog that draws its
//! categories from it.
//!
//! Ancestor checks run over the transitive closure, which is computed once at
//! construction. Everything here is immutable after load.

mod catalog;

pub use catalog::{load_catalog, AttributeType, CatalogError, ObjectCatalog, ObjectRecord};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cycle in taxonomy through concept `{member}`")]
    Cycle { member: String },
    #[error("edge ({child}, {parent}) references undeclared concept `{missing}`")]
    DanglingEdge {
        child: String,
        parent: String,
        missing: String,
    },
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("only {available} conflict-free candidates available, need {needed}")]
    InsufficientCandidates { available: usize, needed: usize },
    #[error("distractor count must be at least 1")]
    ZeroDistractors,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Taxonomy {
    concepts: BTreeSet<String>,
    edges: BTreeSet<(String, String)>,
    ancestors: BTreeMap<String, BTreeSet<String>>,
}

impl Taxonomy {
    /// Builds a taxonomy from concepts and `(child, parent)` edges, rejecting
    /// dangling endpoints and cycles.
    pub fn new<C, E>(concepts: C, edges: E) -> Result<Self, TaxonomyError>
    where
        C: IntoIterator<Item = String>,
        E: IntoIterator<Item = (String, String)>,
    {
        let concepts: BTreeSet<String> = concepts.into_iter().collect();
        let edges: BTreeSet<(String, String)> = edges.into_iter().collect();
        for (child, parent) in &edges {
            for end in [child, parent] {
                if !concepts.contains(end) {
                    return Err(TaxonomyError::DanglingEdge {
                        child: child.clone(),
                        parent: parent.clone(),
                        missing: end.clone(),
                    });
                }
            }
        }
        let mut parents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (child, parent) in &edges {
            parents.entry(child).or_default().push(parent);
        }
        check_acyclic(&concepts, &parents)?;

        let mut ancestors = BTreeMap::new();
        for c in &concepts {
            let mut seen = BTreeSet::new();
            let mut stack: Vec<&str> = parents.get(c.as_str()).cloned().unwrap_or_default();
            while let Some(p) = stack.pop() {
                if seen.insert(p.to_string()) {
                    if let Some(ps) = parents.get(p) {
                        stack.extend(ps.iter().copied());
                    }
                }
            }
            ancestors.insert(c.clone(), seen);
        }
        Ok(Self {
            concepts,
            edges,
            ancestors,
        })
    }

    /// A taxonomy with the given concepts and no edges.
    pub fn flat<I: IntoIterator<Item = String>>(concepts: I) -> Self {
        Self::new(concepts, std::iter::empty()).expect("edge-free taxonomy is always valid")
    }

    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut concepts = Vec::new();
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (tag, rest) = match trimmed.split_once([' ', '\t']) {
                Some((t, r)) => (t, r.trim()),
                None => (trimmed, ""),
            };
            match tag {
                "C" => {
                    if rest.is_empty() {
                        return Err(TaxonomyError::Parse {
                            line: line_no,
                            msg: "concept record without an id".into(),
                        });
                    }
                    concepts.push(rest.to_string());
                }
                "E" => {
                    // Tab-separated endpoints may contain spaces; otherwise
                    // exactly two whitespace-separated tokens.
                    let parts: Vec<&str> = if rest.contains('\t') {
                        rest.split('\t').map(str::trim).filter(|s| !s.is_empty()).collect()
                    } else {
                        rest.split_whitespace().collect()
                    };
                    if parts.len() != 2 {
                        return Err(TaxonomyError::Parse {
                            line: line_no,
                            msg: format!("edge record needs 2 endpoints, found {}", parts.len()),
                        });
                    }
                    edges.push((parts[0].to_string(), parts[1].to_string()));
                }
                other => {
                    return Err(TaxonomyError::Parse {
                        line: line_no,
                        msg: format!("unknown record tag `{other}`"),
                    })
                }
            }
        }
        Self::new(concepts, edges)
    }

    /// Serializes back to the line format (tab-separated edges).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.concepts {
            out.push_str("C ");
            out.push_str(c);
            out.push('\n');
        }
        for (child, parent) in &self.edges {
            out.push_str(&format!("E {child}\t{parent}\n"));
        }
        out
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.concepts.iter().map(String::as_str)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn contains(&self, concept: &str) -> bool {
        self.concepts.contains(concept)
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// True iff `a` is reachable from `b` along child→parent edges.
    /// Irreflexive: `is_ancestor(c, c)` is false.
    pub fn is_ancestor(&self, a: &str, b: &str) -> Result<bool, TaxonomyError> {
        if !self.contains(a) {
            return Err(TaxonomyError::UnknownConcept(a.to_string()));
        }
        let anc = self
            .ancestors
            .get(b)
            .ok_or_else(|| TaxonomyError::UnknownConcept(b.to_string()))?;
        Ok(anc.contains(a))
    }

    /// Whether two concepts may not appear together as options: equal, or one
    /// is an ancestor of the other. Concepts missing from the taxonomy are
    /// only in conflict with themselves.
    pub fn conflicts(&self, a: &str, b: &str) -> bool {
        if a == b {
            return true;
        }
        let up = |x: &str, y: &str| self.ancestors.get(y).is_some_and(|s| s.contains(x));
        up(a, b) || up(b, a)
    }

    /// Draws `k` distractors for `answer` from `pool`, uniformly without
    /// replacement over the candidates that do not conflict with `answer`,
    /// skipping any draw that conflicts with an earlier pick.
    pub fn sample_distractors<R: Rng + ?Sized>(
        &self,
        pool: &[String],
        answer: &str,
        k: usize,
        rng: &mut R,
    ) -> Result<Vec<String>, TaxonomyError> {
        self.sample_distractors_excluding(pool, answer, &[], k, rng)
    }

    /// Like [`Taxonomy::sample_distractors`], additionally rejecting anything
    /// that conflicts with one of `also_valid` (co-answers that must never be
    /// offered as wrong options).
    pub fn sample_distractors_excluding<R: Rng + ?Sized>(
        &self,
        pool: &[String],
        answer: &str,
        also_valid: &[String],
        k: usize,
        rng: &mut R,
    ) -> Result<Vec<String>, TaxonomyError> {
        if k == 0 {
            return Err(TaxonomyError::ZeroDistractors);
        }
        let mut seen = BTreeSet::new();
        let mut candidates: Vec<&String> = pool
            .iter()
            .filter(|c| seen.insert(c.as_str()))
            .filter(|c| !self.conflicts(c, answer))
            .filter(|c| !also_valid.iter().any(|v| self.conflicts(c, v)))
            .collect();
        let available = candidates.len();
        candidates.shuffle(rng);
        let mut picked: Vec<String> = Vec::with_capacity(k);
        for c in candidates {
            if picked.len() == k {
                break;
            }
            if picked.iter().all(|p| !self.conflicts(p, c)) {
                picked.push(c.clone());
            }
        }
        if picked.len() < k {
            return Err(TaxonomyError::InsufficientCandidates {
                available,
                needed: k,
            });
        }
        Ok(picked)
    }

    /// Number of candidates in `pool` that conflict neither with `answer`,
    /// with any of `also_valid`, nor with any other such candidate. Greedy
    /// sampling always succeeds when this is at least `k`.
    pub fn isolated_candidates(&self, pool: &[String], answer: &str, also_valid: &[String]) -> usize {
        let uniq: BTreeSet<&str> = pool.iter().map(String::as_str).collect();
        let cands: Vec<&str> = uniq
            .into_iter()
            .filter(|c| !self.conflicts(c, answer))
            .filter(|c| !also_valid.iter().any(|v| self.conflicts(c, v)))
            .collect();
        cands
            .iter()
            .filter(|c| cands.iter().all(|d| c == &d || !self.conflicts(c, d)))
            .count()
    }
}

fn check_acyclic(
    concepts: &BTreeSet<String>,
    parents: &BTreeMap<&str, Vec<&str>>,
) -> Result<(), TaxonomyError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();
    for start in concepts {
        if marks.contains_key(start.as_str()) {
            continue;
        }
        // iterative DFS: (node, next parent index)
        let mut stack: Vec<(&str, usize)> = vec![(start.as_str(), 0)];
        marks.insert(start.as_str(), Mark::Open);
        while let Some((node, idx)) = stack.pop() {
            let ps = parents.get(node).map(Vec::as_slice).unwrap_or(&[]);
            if idx < ps.len() {
                stack.push((node, idx + 1));
                let next = ps[idx];
                match marks.get(next) {
                    Some(Mark::Open) => {
                        return Err(TaxonomyError::Cycle {
                            member: next.to_string(),
                        })
                    }
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(next, Mark::Open);
                        stack.push((next, 0));
                    }
                }
            } else {
                marks.insert(node, Mark::Done);
            }
        }
    }
    Ok(())
}

pub fn load_taxonomy(path: &Path) -> Result<Taxonomy, TaxonomyError> {
    let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Taxonomy::parse(&text)
}
