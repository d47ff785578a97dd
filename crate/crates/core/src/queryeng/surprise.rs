//! Surprisingness: how much better a model does on a task than on its K
//! most similar tasks, weighting each gap by similarity.

use std::collections::BTreeMap;

use serde::Serialize;

use super::QueryError;
use crate::planspace::PlanId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub plan_id: PlanId,
    pub sim: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurprisingnessScore {
    pub plan_id: PlanId,
    pub model: String,
    pub k: usize,
    pub s: f64,
    pub value: f64,
    pub neighbors: Vec<Neighbor>,
}

/// Cosine similarity clamped to [0, 1]; zero vectors have similarity 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Scores every task in `values` (model accuracy per plan). Neighbors are
/// the K most similar other tasks, ties broken by plan id. Output is sorted
/// by score descending, then plan id.
pub fn surprisingness(
    model: &str,
    values: &BTreeMap<PlanId, f64>,
    embeddings: &BTreeMap<PlanId, Vec<f64>>,
    k: usize,
) -> Result<Vec<SurprisingnessScore>, QueryError> {
    let n = values.len();
    if k == 0 || k >= n {
        return Err(QueryError::InsufficientNeighbors { k, n });
    }
    let ids: Vec<PlanId> = values.keys().copied().collect();
    let vecs: Vec<&Vec<f64>> = ids
        .iter()
        .map(|id| embeddings.get(id).ok_or(QueryError::MissingEmbedding(*id)))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(n);
    for (i, id) in ids.iter().enumerate() {
        let mut sims: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (cosine(vecs[i], vecs[j]), j)).collect();
        sims.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        sims.truncate(k);
        let fi = values[id];
        let s = sims.iter().map(|&(sim, j)| sim * (fi - values[&ids[j]])).sum::<f64>() / k as f64;
        out.push(SurprisingnessScore {
            plan_id: *id,
            model: model.to_string(),
            k,
            s,
            value: fi,
            neighbors: sims
                .iter()
                .map(|&(sim, j)| Neighbor {
                    plan_id: ids[j],
                    sim,
                    value: values[&ids[j]],
                })
                .collect(),
        });
    }
    out.sort_by(|a, b| b.s.total_cmp(&a.s).then(a.plan_id.cmp(&b.plan_id)));
    Ok(out)
}
