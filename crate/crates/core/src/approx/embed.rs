//! Task embeddings. The default is a hashed one-hot over plan atoms; an
//! embedding file can supply vectors from any external model instead.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ApproxError;
use crate::planspace::{PlanId, TaskPlan};
use crate::util::stable_hash64;

pub const DEFAULT_DIM: usize = 128;

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, plan: &TaskPlan) -> Result<Vec<f64>, ApproxError>;
}

/// Each `field=value` atom, plus `generator=<id>`, adds ±1 at a hashed
/// coordinate: the low bits pick the coordinate, the top bit the sign. The
/// sum is L2-normalized.
#[derive(Debug, Clone, Copy)]
pub struct HashedEmbedder {
    dim: usize,
}

impl HashedEmbedder {
    pub fn new(dim: usize) -> Result<Self, ApproxError> {
        if dim < 8 {
            return Err(ApproxError::Invalid(format!("embedding dimension {dim} is below 8")));
        }
        Ok(Self { dim })
    }
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM }
    }
}

pub fn embed_plan(plan: &TaskPlan, dim: usize) -> Result<Vec<f64>, ApproxError> {
    HashedEmbedder::new(dim)?.embed(plan)
}

impl Embedder for HashedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, plan: &TaskPlan) -> Result<Vec<f64>, ApproxError> {
        let mut v = vec![0.0; self.dim];
        let mut atoms = plan.atoms();
        atoms.push(format!("generator={}", plan.generator));
        for a in atoms {
            let h = stable_hash64(a.as_bytes());
            let i = (h % self.dim as u64) as usize;
            v[i] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingLine {
    plan_id: PlanId,
    vector: Vec<f64>,
}

/// Vectors read from a file of `{"plan_id", "vector"}` lines.
#[derive(Debug, Clone, Default)]
pub struct TableEmbedder {
    dim: usize,
    vectors: BTreeMap<PlanId, Vec<f64>>,
}

impl TableEmbedder {
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, ApproxError> {
        let mut t = Self::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| ApproxError::Invalid(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmbeddingLine = serde_json::from_str(&line)
                .map_err(|e| ApproxError::Invalid(format!("embedding line {}: {e}", i + 1)))?;
            if rec.vector.iter().any(|x| !x.is_finite()) {
                return Err(ApproxError::Invalid(format!("embedding line {}: non-finite entry", i + 1)));
            }
            if t.vectors.is_empty() {
                t.dim = rec.vector.len();
            } else if rec.vector.len() != t.dim {
                return Err(ApproxError::Invalid(format!(
                    "embedding line {}: dimension {} differs from {}",
                    i + 1,
                    rec.vector.len(),
                    t.dim
                )));
            }
            t.vectors.insert(rec.plan_id, rec.vector);
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, ApproxError> {
        let f = std::fs::File::open(path).map_err(|e| ApproxError::Invalid(format!("{}: {e}", path.display())))?;
        Self::parse(std::io::BufReader::new(f))
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl Embedder for TableEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, plan: &TaskPlan) -> Result<Vec<f64>, ApproxError> {
        self.vectors
            .get(&plan.id)
            .cloned()
            .ok_or(ApproxError::MissingEmbedding(plan.id))
    }
}

pub fn embed_all(embedder: &dyn Embedder, plans: &[&TaskPlan]) -> Result<BTreeMap<PlanId, Vec<f64>>, ApproxError> {
    plans.iter().map(|p| Ok((p.id, embedder.embed(p)?))).collect()
}

/// Serializes vectors in the embedding-file format.
pub fn to_jsonl(vectors: &BTreeMap<PlanId, Vec<f64>>) -> String {
    let mut out = String::new();
    for (id, v) in vectors {
        let line = EmbeddingLine {
            plan_id: *id,
            vector: v.clone(),
        };
        out.push_str(&serde_json::to_string(&line).expect("serializable"));
        out.push('\n');
    }
    out
}
