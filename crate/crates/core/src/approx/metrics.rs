//! Approximation quality: mean rank and hit rate for top-k answers,
//! precision / recall / F1 for set answers.

use std::collections::{BTreeSet, HashMap};
use std::hash::Hash;

use super::ApproxError;

/// Average 1-based position of `returned` items in `truth` (a full ranking).
pub fn mean_rank<T: Eq + Hash + std::fmt::Debug>(returned: &[T], truth: &[T]) -> Result<f64, ApproxError> {
    if returned.is_empty() {
        return Err(ApproxError::Invalid("nothing returned".into()));
    }
    let pos: HashMap<&T, usize> = truth.iter().enumerate().map(|(i, t)| (t, i + 1)).collect();
    let mut sum = 0usize;
    for r in returned {
        sum += pos
            .get(r)
            .ok_or_else(|| ApproxError::UnknownItem(format!("{r:?}")))?;
    }
    Ok(sum as f64 / returned.len() as f64)
}

/// Percentage of the true top-K found among the K returned items.
pub fn hit_rate<T: Ord>(returned: &[T], true_top: &[T]) -> Result<f64, ApproxError> {
    if returned.len() != true_top.len() || true_top.is_empty() {
        return Err(ApproxError::SizeMismatch {
            returned: returned.len(),
            truth: true_top.len(),
        });
    }
    let t: BTreeSet<&T> = true_top.iter().collect();
    let hits = returned.iter().collect::<BTreeSet<_>>().intersection(&t).count();
    Ok(100.0 * hits as f64 / true_top.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1. Empty predictions or truth give 0 for the
/// undefined ratio, and F1 is 0 when both are 0.
pub fn prf1<T: Ord>(predicted: &BTreeSet<T>, truth: &BTreeSet<T>) -> Prf1 {
    let tp = predicted.intersection(truth).count() as f64;
    let precision = if predicted.is_empty() { 0.0 } else { tp / predicted.len() as f64 };
    let recall = if truth.is_empty() { 0.0 } else { tp / truth.len() as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf1 { precision, recall, f1 }
}
