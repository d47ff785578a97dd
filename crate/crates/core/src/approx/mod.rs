//! Budgeted approximation of query answers. A budget counts task
//! evaluations; one unit evaluates every queried model on one task.
//!
//! * `Random` evaluates B sampled tasks and answers on that subset alone.
//! * `Fitting` evaluates the same sample, fits a GP on task embeddings and
//!   answers on measured values merged with predictions for the rest.
//! * `Active` spends half the budget on a random seed set, then repeatedly
//!   refits and evaluates the batch the query cares most about: the likely
//!   top-k members, or the tasks predicted closest to the decision boundary.

mod embed;
mod gp;
mod metrics;

use std::collections::BTreeMap;

use rand::seq::index::sample;
use serde::Serialize;
use thiserror::Error;

pub use embed::{embed_all, embed_plan, to_jsonl, Embedder, HashedEmbedder, TableEmbedder, DEFAULT_DIM};
pub use gp::{rbf, GpParams, GpRegressor, BASE_JITTER};
pub use metrics::{hit_rate, mean_rank, prf1, Prf1};

use crate::evalrun::{evaluate_task, EvalConfig, EvalContext, EvalError, ModelAdapter, ResultsDb};
use crate::planspace::{PlanId, TaskPlan};
use crate::queryeng::{aggregate_values, AccuracyTable, answer_from_values, item_key, Query, QueryError, QueryKind, QueryResult, Order};
use crate::util::rng_from;

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error("budget must be at least 1")]
    BudgetZero,
    #[error("scope is empty")]
    EmptyScope,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("kernel matrix is not positive definite even with maximum jitter")]
    NotPositiveDefinite,
    #[error("no embedding for plan {0}")]
    MissingEmbedding(PlanId),
    #[error("item {0} is not in the reference ranking")]
    UnknownItem(String),
    #[error("returned {returned} items for a top-{truth} reference")]
    SizeMismatch { returned: usize, truth: usize },
    #[error("evaluator failed: {0}")]
    Evaluator(String),
    #[error(transparent)]
    Query(#[from] QueryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Fitting,
    Active,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Random, Strategy::Fitting, Strategy::Active];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(Self::Random),
            "fitting" => Some(Self::Fitting),
            "active" => Some(Self::Active),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct Budget {
    pub total: usize,
    /// Active-round batch size; defaults to max(K, B/10).
    #[serde(default)]
    pub batch: Option<usize>,
}

impl Budget {
    pub fn new(total: usize) -> Self {
        Self { total, batch: None }
    }
}

/// Measures accuracies. Each call evaluates `models` on `plans` and
/// returns one row of accuracies (in `models` order) per plan.
pub trait TaskEvaluator {
    fn evaluate(&mut self, plans: &[&TaskPlan], models: &[String]) -> Result<Vec<Vec<f64>>, String>;
}

/// Evaluator from a closure `(plan, model) -> accuracy`.
pub struct FnEvaluator<F>(pub F);

impl<F: FnMut(&TaskPlan, &str) -> f64> TaskEvaluator for FnEvaluator<F> {
    fn evaluate(&mut self, plans: &[&TaskPlan], models: &[String]) -> Result<Vec<Vec<f64>>, String> {
        Ok(plans
            .iter()
            .map(|p| models.iter().map(|m| (self.0)(p, m)).collect())
            .collect())
    }
}

/// Replays measurements already in an accuracy table, as when the full
/// grid was built offline. Missing cells fail the batch.
pub struct TableEvaluator<'a>(pub &'a AccuracyTable);

impl TaskEvaluator for TableEvaluator<'_> {
    fn evaluate(&mut self, plans: &[&TaskPlan], models: &[String]) -> Result<Vec<Vec<f64>>, String> {
        plans
            .iter()
            .map(|p| {
                models
                    .iter()
                    .map(|m| {
                        self.0
                            .get(m, p.id)
                            .ok_or_else(|| format!("no measurement for model `{m}` on plan {}", p.id))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Evaluates real adapters through the evaluation pipeline, recording
/// every instance in `db`.
pub struct PipelineEvaluator<'a> {
    pub adapters: BTreeMap<String, std::sync::Arc<dyn ModelAdapter>>,
    pub ctx: EvalContext<'a>,
    pub cfg: EvalConfig,
    pub db: &'a mut ResultsDb,
}

impl TaskEvaluator for PipelineEvaluator<'_> {
    fn evaluate(&mut self, plans: &[&TaskPlan], models: &[String]) -> Result<Vec<Vec<f64>>, String> {
        let mut rows = Vec::with_capacity(plans.len());
        for p in plans {
            let mut row = Vec::with_capacity(models.len());
            for m in models {
                let a = self.adapters.get(m).ok_or_else(|| format!("no adapter for model `{m}`"))?;
                let acc = evaluate_task(a.as_ref(), p, self.ctx, &self.cfg, self.db).map_err(|e: EvalError| e.to_string())?;
                row.push(acc);
            }
            rows.push(row);
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Round {
    pub round: usize,
    pub evaluated: usize,
    pub consumed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxResult {
    pub strategy: Strategy,
    pub budget: usize,
    pub consumed: usize,
    /// Measured per-task statistic.
    pub evaluated: BTreeMap<PlanId, f64>,
    /// GP predictions for unevaluated tasks (empty for `Random`).
    pub predicted: BTreeMap<PlanId, f64>,
    pub rounds: Vec<Round>,
    pub answer: QueryResult,
    /// Set when the evaluator failed and the answer uses partial data.
    pub partial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct ApproxOptions {
    pub strategy: Strategy,
    pub budget: Budget,
    pub seed: u64,
    pub gp: GpParams,
}

struct Run<'q, 'p> {
    query: &'q Query,
    scope: &'q [&'p TaskPlan],
    models: Vec<String>,
    emb: Vec<Vec<f64>>,
    evaluated: BTreeMap<usize, f64>,
    consumed: usize,
    budget: usize,
    error: Option<String>,
}

impl Run<'_, '_> {
    /// Evaluates scope indices, charging one unit each. Stops at the first
    /// evaluator failure.
    fn spend(&mut self, idx: &[usize], eval: &mut dyn TaskEvaluator) -> bool {
        let take = idx.len().min(self.budget - self.consumed);
        let idx = &idx[..take];
        if idx.is_empty() {
            return true;
        }
        let plans: Vec<&TaskPlan> = idx.iter().map(|&i| self.scope[i]).collect();
        self.consumed += idx.len();
        match eval.evaluate(&plans, &self.models) {
            Ok(rows) => {
                for (&i, accs) in idx.iter().zip(rows) {
                    self.evaluated.insert(i, self.query.task_statistic(&accs));
                }
                true
            }
            Err(e) => {
                self.error = Some(e);
                false
            }
        }
    }

    fn predict(&self, gp: &GpParams) -> Result<BTreeMap<usize, f64>, ApproxError> {
        let (x, y): (Vec<Vec<f64>>, Vec<f64>) =
            self.evaluated.iter().map(|(&i, &v)| (self.emb[i].clone(), v)).unzip();
        if x.is_empty() {
            return Ok(BTreeMap::new());
        }
        let model = GpRegressor::fit(&x, &y, *gp)?;
        let rest: Vec<usize> = (0..self.scope.len()).filter(|i| !self.evaluated.contains_key(i)).collect();
        let q: Vec<Vec<f64>> = rest.iter().map(|&i| self.emb[i].clone()).collect();
        let (mean, _) = model.predict(&q)?;
        Ok(rest.into_iter().zip(mean).collect())
    }

    fn merged(&self, predicted: &BTreeMap<usize, f64>) -> BTreeMap<PlanId, f64> {
        let mut m: BTreeMap<PlanId, f64> = predicted.iter().map(|(&i, &v)| (self.scope[i].id, v)).collect();
        for (&i, &v) in &self.evaluated {
            m.insert(self.scope[i].id, v);
        }
        m
    }

    /// Next active batch: unevaluated tasks of the items ranked most
    /// relevant to the query, each item's tasks taken in the same order.
    fn select(&self, predicted: &BTreeMap<usize, f64>, batch: usize) -> Vec<usize> {
        let merged = self.merged(predicted);
        let items = aggregate_values(&self.query.target, self.scope, &merged);
        let values: Vec<f64> = items.values().map(|(v, _)| *v).collect();
        let boundary = self.query.boundary(&values);
        // lower score = more relevant
        let score = |v: f64| match (&self.query.kind, boundary) {
            (QueryKind::TopK { order: Order::Asc, .. }, _) => v,
            (QueryKind::TopK { .. }, _) => -v,
            (_, Some(b)) => (v - b).abs(),
            (_, None) => 0.0,
        };
        let mut ranked: Vec<(f64, _)> = items.iter().map(|(k, (v, _))| (score(*v), k)).collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        let mut by_item: BTreeMap<_, Vec<(f64, usize)>> = BTreeMap::new();
        for (&i, &v) in predicted {
            if let Some(k) = item_key(self.scope[i], &self.query.target) {
                by_item.entry(k).or_default().push((score(v), i));
            }
        }
        let mut out = Vec::with_capacity(batch);
        for (_, key) in ranked {
            let Some(tasks) = by_item.get_mut(key) else { continue };
            tasks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, i) in tasks.iter() {
                if out.len() == batch {
                    return out;
                }
                out.push(i);
            }
        }
        out
    }

    fn random_sample(&self, k: usize, seed: u64) -> Vec<usize> {
        let mut rng = rng_from(&[seed, 0x5a3d]);
        let free: Vec<usize> = (0..self.scope.len()).filter(|i| !self.evaluated.contains_key(i)).collect();
        let k = k.min(free.len());
        let mut picked: Vec<usize> = sample(&mut rng, free.len(), k).into_iter().map(|j| free[j]).collect();
        picked.sort_unstable();
        picked
    }
}

/// Approximates `query` over `scope` within `opts.budget`.
pub fn approximate(
    query: &Query,
    scope: &[&TaskPlan],
    embedder: &dyn Embedder,
    evaluator: &mut dyn TaskEvaluator,
    opts: ApproxOptions,
) -> Result<ApproxResult, ApproxError> {
    query.validate()?;
    if opts.budget.total == 0 {
        return Err(ApproxError::BudgetZero);
    }
    if scope.is_empty() {
        return Err(ApproxError::EmptyScope);
    }
    let emb = scope.iter().map(|p| embedder.embed(p)).collect::<Result<Vec<_>, _>>()?;
    let mut run = Run {
        query,
        scope,
        models: query.model_set(),
        emb,
        evaluated: BTreeMap::new(),
        consumed: 0,
        budget: opts.budget.total,
        error: None,
    };
    let n = scope.len();
    let mut rounds = Vec::new();
    let mut predicted = BTreeMap::new();
    let full = opts.budget.total >= n;
    if full {
        let all: Vec<usize> = (0..n).collect();
        run.spend(&all, evaluator);
        rounds.push(Round {
            round: 0,
            evaluated: run.evaluated.len(),
            consumed: run.consumed,
        });
    } else {
        let seed_size = match opts.strategy {
            Strategy::Active => (opts.budget.total / 2).max(1),
            _ => opts.budget.total,
        };
        let first = run.random_sample(seed_size, opts.seed);
        let mut ok = run.spend(&first, evaluator);
        rounds.push(Round {
            round: 0,
            evaluated: run.evaluated.len(),
            consumed: run.consumed,
        });
        if opts.strategy == Strategy::Active {
            let k = match query.kind {
                QueryKind::TopK { k, .. } => k,
                _ => 1,
            };
            let batch = opts.budget.batch.unwrap_or((opts.budget.total / 10).max(k)).max(1);
            while ok && run.consumed < run.budget {
                predicted = run.predict(&opts.gp)?;
                if predicted.is_empty() {
                    break;
                }
                let want = batch.min(run.budget - run.consumed);
                let next = run.select(&predicted, want);
                if next.is_empty() {
                    break;
                }
                ok = run.spend(&next, evaluator);
                rounds.push(Round {
                    round: rounds.len(),
                    evaluated: run.evaluated.len(),
                    consumed: run.consumed,
                });
            }
        }
        if opts.strategy != Strategy::Random {
            predicted = run.predict(&opts.gp)?;
        }
    }
    if full || opts.strategy == Strategy::Random {
        predicted.clear();
    }
    if run.evaluated.is_empty() && predicted.is_empty() {
        return Err(ApproxError::Evaluator(run.error.unwrap_or_else(|| "nothing evaluated".into())));
    }
    let view = run.merged(&predicted);
    let answer = answer_from_values(query, scope, &view)?;
    debug_assert!(run.consumed <= run.budget);
    Ok(ApproxResult {
        strategy: opts.strategy,
        budget: opts.budget.total,
        consumed: run.consumed,
        evaluated: run.evaluated.iter().map(|(&i, &v)| (scope[i].id, v)).collect(),
        predicted: predicted.iter().map(|(&i, &v)| (scope[i].id, v)).collect(),
        rounds,
        answer,
        partial: run.error.is_some(),
        error: run.error,
    })
}
