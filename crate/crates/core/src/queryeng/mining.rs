//! Closed frequent itemsets over plan atoms (`field=value`), enumerated by
//! prefix-preserving closure extension so each closed set is visited once.

use std::collections::BTreeMap;

use serde::Serialize;

use super::QueryError;
use crate::planspace::TaskPlan;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pattern {
    pub items: Vec<String>,
    pub support: f64,
    pub count: usize,
}

struct Miner {
    /// Transactions as sorted atom ids.
    tx: Vec<Vec<usize>>,
    /// Transactions containing each atom.
    occ: Vec<Vec<usize>>,
    min_count: usize,
    out: Vec<(Vec<usize>, usize)>,
}

impl Miner {
    fn closure(&self, tids: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.occ.len()];
        for &t in tids {
            for &a in &self.tx[t] {
                counts[a] += 1;
            }
        }
        (0..counts.len()).filter(|&a| counts[a] == tids.len()).collect()
    }

    fn expand(&mut self, set: Vec<usize>, tids: Vec<usize>, core: Option<usize>) {
        if !set.is_empty() {
            self.out.push((set.clone(), tids.len()));
        }
        let start = core.map_or(0, |c| c + 1);
        for e in start..self.occ.len() {
            if set.binary_search(&e).is_ok() {
                continue;
            }
            let next: Vec<usize> = tids.iter().copied().filter(|t| self.tx[*t].binary_search(&e).is_ok()).collect();
            if next.len() < self.min_count || next.is_empty() {
                continue;
            }
            let closed = self.closure(&next);
            // prefix-preserving: the closure may not add atoms below e
            let below_new = closed.iter().take_while(|&&a| a < e);
            let below_old = set.iter().take_while(|&&a| a < e);
            if !below_new.eq(below_old) {
                continue;
            }
            self.expand(closed, next, Some(e));
        }
    }
}

/// Every closed itemset with support at least `min_support`, sorted by
/// support descending, size descending, then atoms.
pub fn mine_patterns(plans: &[&TaskPlan], min_support: f64) -> Result<Vec<Pattern>, QueryError> {
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(QueryError::BadSupport(min_support));
    }
    if plans.is_empty() {
        return Err(QueryError::EmptyInput);
    }
    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    for p in plans {
        for a in p.atoms() {
            ids.entry(a).or_insert(0);
        }
    }
    for (i, v) in ids.values_mut().enumerate() {
        *v = i;
    }
    let names: Vec<&String> = ids.keys().collect();
    let tx: Vec<Vec<usize>> = plans
        .iter()
        .map(|p| {
            let mut t: Vec<usize> = p.atoms().iter().map(|a| ids[a]).collect();
            t.sort_unstable();
            t.dedup();
            t
        })
        .collect();
    let mut occ = vec![Vec::new(); ids.len()];
    for (t, atoms) in tx.iter().enumerate() {
        for &a in atoms {
            occ[a].push(t);
        }
    }
    let n = plans.len();
    let min_count = ((min_support * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut m = Miner {
        tx,
        occ,
        min_count,
        out: Vec::new(),
    };
    let all: Vec<usize> = (0..n).collect();
    let root = m.closure(&all);
    m.expand(root, all, None);
    let mut pats: Vec<Pattern> = m
        .out
        .into_iter()
        .map(|(set, count)| Pattern {
            items: set.iter().map(|&a| names[a].clone()).collect(),
            support: count as f64 / n as f64,
            count,
        })
        .collect();
    pats.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(b.items.len().cmp(&a.items.len()))
            .then_with(|| a.items.cmp(&b.items))
    });
    Ok(pats)
}
