//! Exact fine-grained queries over per-(model, plan) accuracies: top-k,
//! threshold, model comparison and model debugging, with optional grouping
//! by plan metadata, plus pattern mining and surprisingness.
//!
//! Every query reduces each task to one statistic (the inner aggregate over
//! the model set, or the accuracy difference for comparisons), averages the
//! statistic within groups, and selects items from those values.

mod mining;
mod surprise;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

pub use mining::{mine_patterns, Pattern};
pub use surprise::{cosine, surprisingness, Neighbor, SurprisingnessScore};

use crate::evalrun::ResultsDb;
use crate::planspace::{PlanError, PlanFilter, PlanId, TaskPlan};
use crate::taxonomy::Taxonomy;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("invalid query: {0}")]
    Invalid(String),
    #[error("query scope is empty")]
    EmptyScope,
    #[error("missing accuracy for {} (model, plan) pairs, first: {}", .0.len(), fmt_pair(.0.first()))]
    MissingCells(Vec<(String, PlanId)>),
    #[error("model debugging needs at least two items, scope has {0}")]
    DegenerateScope(usize),
    #[error("need more than {k} tasks for {k} neighbors, scope has {n}")]
    InsufficientNeighbors { k: usize, n: usize },
    #[error("no embedding for plan {0}")]
    MissingEmbedding(PlanId),
    #[error("min support must be in (0, 1], got {0}")]
    BadSupport(f64),
    #[error("nothing to mine")]
    EmptyInput,
    #[error(transparent)]
    Plan(#[from] PlanError),
}

fn fmt_pair(p: Option<&(String, PlanId)>) -> String {
    p.map(|(m, id)| format!("({m}, {id})")).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerAgg {
    Min,
    Max,
    #[default]
    Mean,
}

impl InnerAgg {
    pub fn apply(self, xs: &[f64]) -> f64 {
        match self {
            Self::Min => xs.iter().copied().fold(f64::INFINITY, f64::min),
            Self::Max => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Self::Mean => xs.iter().sum::<f64>() / xs.len() as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    #[default]
    Desc,
    Asc,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DebugMode {
    #[default]
    Worse,
    Better,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum QueryKind {
    TopK {
        k: usize,
        #[serde(default)]
        order: Order,
    },
    Threshold {
        theta: f64,
        #[serde(default)]
        direction: Direction,
    },
    Compare {
        m1: String,
        m2: String,
        #[serde(default)]
        margin: f64,
    },
    Debug {
        #[serde(default = "one")]
        k_sigma: f64,
        #[serde(default)]
        mode: DebugMode,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scope {
    /// Generators in scope; empty means all.
    #[serde(default)]
    pub generators: Vec<String>,
    #[serde(default)]
    pub filter: PlanFilter,
}

impl Scope {
    pub fn select<'a>(&self, plans: &'a [TaskPlan], taxonomy: Option<&Taxonomy>) -> Result<Vec<&'a TaskPlan>, QueryError> {
        let in_gen = |p: &TaskPlan| self.generators.is_empty() || self.generators.contains(&p.generator);
        for c in &self.filter.clauses {
            if !plans.iter().filter(|p| in_gen(p)).any(|p| p.get(c.field()).is_some()) {
                return Err(PlanError::UnknownField(c.field().to_string()).into());
            }
        }
        let mut out = Vec::new();
        for p in plans.iter().filter(|p| in_gen(p)) {
            if self.filter.matches(p, taxonomy)? {
                out.push(p);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    #[default]
    Tasks,
    /// Group tasks by the product of these fields.
    Group(Vec<String>),
}

/// A query description, as accepted by the CLI and the HTTP API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    #[serde(flatten)]
    pub kind: QueryKind,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default)]
    pub target: Target,
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default)]
    pub inner_agg: InnerAgg,
    /// When set, closed patterns are mined from the result tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mine_support: Option<f64>,
}

impl Query {
    pub fn new(kind: QueryKind, models: &[&str]) -> Self {
        Self {
            kind,
            scope: Scope::default(),
            target: Target::Tasks,
            models: models.iter().map(|m| m.to_string()).collect(),
            inner_agg: InnerAgg::Mean,
            mine_support: None,
        }
    }

    pub fn grouped(mut self, fields: &[&str]) -> Self {
        self.target = Target::Group(fields.iter().map(|f| f.to_string()).collect());
        self
    }

    pub fn with_inner(mut self, agg: InnerAgg) -> Self {
        self.inner_agg = agg;
        self
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        let bad = |m: &str| Err(QueryError::Invalid(m.into()));
        match &self.kind {
            QueryKind::TopK { k, .. } if *k == 0 => return bad("k must be at least 1"),
            QueryKind::Threshold { theta, .. } if !(0.0..=1.0).contains(theta) => {
                return bad("theta must be in [0, 1]")
            }
            QueryKind::Compare { m1, m2, margin } => {
                if m1 == m2 {
                    return bad("compare needs two different models");
                }
                if !margin.is_finite() {
                    return bad("margin must be finite");
                }
            }
            QueryKind::Debug { k_sigma, .. } if !(k_sigma.is_finite() && *k_sigma >= 0.0) => {
                return bad("k_sigma must be a non-negative number")
            }
            _ => {}
        }
        if !matches!(self.kind, QueryKind::Compare { .. }) && self.models.is_empty() {
            return bad("model set is empty");
        }
        if let Target::Group(f) = &self.target {
            if f.is_empty() {
                return bad("grouping needs at least one field");
            }
        }
        if let Some(s) = self.mine_support {
            if !(s > 0.0 && s <= 1.0) {
                return Err(QueryError::BadSupport(s));
            }
        }
        Ok(())
    }

    /// Models whose accuracy the per-task statistic reads.
    pub fn model_set(&self) -> Vec<String> {
        match &self.kind {
            QueryKind::Compare { m1, m2, .. } => vec![m1.clone(), m2.clone()],
            _ => self.models.clone(),
        }
    }

    /// Per-task statistic from per-model accuracies, in `model_set` order.
    pub fn task_statistic(&self, accs: &[f64]) -> f64 {
        match &self.kind {
            QueryKind::Compare { .. } => accs[0] - accs[1],
            _ => self.inner_agg.apply(accs),
        }
    }

    /// The value against which items are tested, for threshold-like kinds.
    /// Debugging needs the item values to compute it.
    pub fn boundary(&self, values: &[f64]) -> Option<f64> {
        match &self.kind {
            QueryKind::TopK { .. } => None,
            QueryKind::Threshold { theta, .. } => Some(*theta),
            QueryKind::Compare { margin, .. } => Some(*margin),
            QueryKind::Debug { k_sigma, mode } => {
                let (mu, sigma) = mean_std(values);
                Some(match mode {
                    DebugMode::Worse => mu - k_sigma * sigma,
                    DebugMode::Better => mu + k_sigma * sigma,
                })
            }
        }
    }
}

/// Result item: a single task or a metadata group.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ItemKey {
    Task(PlanId),
    Group(Vec<(String, String)>),
}

impl fmt::Display for ItemKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ItemKey::Task(id) => write!(f, "{id}"),
            ItemKey::Group(kv) => {
                let parts: Vec<String> = kv.iter().map(|(k, v)| format!("{k}={v}")).collect();
                f.write_str(&parts.join("|"))
            }
        }
    }
}

impl Serialize for ItemKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Group key of `plan` under `target`, or `None` when a grouping field is
/// null or absent (such tasks belong to no group).
pub fn item_key(plan: &TaskPlan, target: &Target) -> Option<ItemKey> {
    match target {
        Target::Tasks => Some(ItemKey::Task(plan.id)),
        Target::Group(fields) => {
            let mut kv = Vec::with_capacity(fields.len());
            for f in fields {
                let v = plan.get(f).filter(|v| !v.is_null())?;
                kv.push((f.clone(), v.to_string()));
            }
            Some(ItemKey::Group(kv))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    pub mu: f64,
    pub sigma: f64,
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
    (mu, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultItem {
    pub item: ItemKey,
    pub value: f64,
    /// Tasks contributing to the value.
    pub tasks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryResult {
    pub kind: &'static str,
    pub items: Vec<ResultItem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<ModelStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patterns: Option<Vec<Pattern>>,
}

impl QueryResult {
    pub fn keys(&self) -> Vec<ItemKey> {
        self.items.iter().map(|i| i.item.clone()).collect()
    }

    pub fn key_set(&self) -> BTreeSet<ItemKey> {
        self.items.iter().map(|i| i.item.clone()).collect()
    }
}

/// Accuracy per (model, plan); the view every query reads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccuracyTable {
    cells: BTreeMap<(String, PlanId), f64>,
}

impl AccuracyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_db(db: &ResultsDb) -> Self {
        Self {
            cells: db.cells().iter().map(|(k, c)| (k.clone(), c.accuracy())).collect(),
        }
    }

    pub fn insert(&mut self, model: &str, plan: PlanId, acc: f64) {
        self.cells.insert((model.to_string(), plan), acc);
    }

    pub fn get(&self, model: &str, plan: PlanId) -> Option<f64> {
        self.cells.get(&(model.to_string(), plan)).copied()
    }

    pub fn models(&self) -> Vec<String> {
        let s: BTreeSet<&String> = self.cells.keys().map(|(m, _)| m).collect();
        s.into_iter().cloned().collect()
    }

    /// Cells in (model, plan) order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, PlanId, f64)> {
        self.cells.iter().map(|((m, p), a)| (m.as_str(), *p, *a))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Per-task statistic for every scoped plan; all cells must be present.
pub fn task_values(query: &Query, plans: &[&TaskPlan], table: &AccuracyTable) -> Result<BTreeMap<PlanId, f64>, QueryError> {
    let models = query.model_set();
    let mut missing = Vec::new();
    let mut out = BTreeMap::new();
    let mut accs = Vec::with_capacity(models.len());
    for p in plans {
        accs.clear();
        for m in &models {
            match table.get(m, p.id) {
                Some(a) => accs.push(a),
                None => missing.push((m.clone(), p.id)),
            }
        }
        if accs.len() == models.len() {
            out.insert(p.id, query.task_statistic(&accs));
        }
    }
    if !missing.is_empty() {
        return Err(QueryError::MissingCells(missing));
    }
    Ok(out)
}

/// Item values: task statistics averaged within each group. Plans without
/// a value are ignored.
pub fn aggregate_values(
    target: &Target,
    plans: &[&TaskPlan],
    values: &BTreeMap<PlanId, f64>,
) -> BTreeMap<ItemKey, (f64, usize)> {
    let mut sums: BTreeMap<ItemKey, (f64, usize)> = BTreeMap::new();
    for p in plans {
        let (Some(v), Some(key)) = (values.get(&p.id), item_key(p, target)) else {
            continue;
        };
        let e = sums.entry(key).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    for e in sums.values_mut() {
        e.0 /= e.1 as f64;
    }
    sums
}

/// Inner aggregate across models per task, then mean within groups.
pub fn aggregate(
    query: &Query,
    plans: &[TaskPlan],
    table: &AccuracyTable,
    taxonomy: Option<&Taxonomy>,
) -> Result<BTreeMap<ItemKey, f64>, QueryError> {
    query.validate()?;
    let scoped = query.scope.select(plans, taxonomy)?;
    let values = task_values(query, &scoped, table)?;
    Ok(aggregate_values(&query.target, &scoped, &values)
        .into_iter()
        .map(|(k, (v, _))| (k, v))
        .collect())
}

/// Answers `query` from precomputed per-task statistics. Used both for
/// exact execution and for approximate (merged or subset) views.
pub fn answer_from_values(
    query: &Query,
    plans: &[&TaskPlan],
    values: &BTreeMap<PlanId, f64>,
) -> Result<QueryResult, QueryError> {
    query.validate()?;
    let items = aggregate_values(&query.target, plans, values);
    if items.is_empty() {
        return Err(QueryError::EmptyScope);
    }
    let all: Vec<f64> = items.values().map(|(v, _)| *v).collect();
    let mut stats = None;
    let mk = |(k, (v, n)): (&ItemKey, &(f64, usize))| ResultItem {
        item: k.clone(),
        value: *v,
        tasks: *n,
    };
    let selected: Vec<ResultItem> = match &query.kind {
        QueryKind::TopK { k, order } => {
            let mut ranked: Vec<ResultItem> = items.iter().map(mk).collect();
            ranked.sort_by(|a, b| {
                let c = match order {
                    Order::Desc => b.value.total_cmp(&a.value),
                    Order::Asc => a.value.total_cmp(&b.value),
                };
                c.then_with(|| a.item.cmp(&b.item))
            });
            ranked.truncate(*k);
            ranked
        }
        QueryKind::Threshold { theta, direction } => items
            .iter()
            .filter(|(_, (v, _))| match direction {
                Direction::Above => *v > *theta,
                Direction::Below => *v < *theta,
            })
            .map(mk)
            .collect(),
        QueryKind::Compare { margin, .. } => items.iter().filter(|(_, (v, _))| *v > *margin).map(mk).collect(),
        QueryKind::Debug { mode, .. } => {
            if items.len() < 2 {
                return Err(QueryError::DegenerateScope(items.len()));
            }
            let (mu, sigma) = mean_std(&all);
            stats = Some(ModelStats { mu, sigma });
            let bound = query.boundary(&all).expect("debug has a boundary");
            items
                .iter()
                .filter(|(_, (v, _))| match mode {
                    DebugMode::Worse => *v < bound,
                    DebugMode::Better => *v > bound,
                })
                .map(mk)
                .collect()
        }
    };
    let patterns = match query.mine_support {
        Some(s) => {
            let chosen: BTreeSet<&ItemKey> = selected.iter().map(|i| &i.item).collect();
            let tasks: Vec<&TaskPlan> = plans
                .iter()
                .copied()
                .filter(|p| values.contains_key(&p.id))
                .filter(|p| item_key(p, &query.target).is_some_and(|k| chosen.contains(&k)))
                .collect();
            if tasks.is_empty() {
                Some(Vec::new())
            } else {
                Some(mine_patterns(&tasks, s)?)
            }
        }
        None => None,
    };
    Ok(QueryResult {
        kind: match query.kind {
            QueryKind::TopK { .. } => "top-k",
            QueryKind::Threshold { .. } => "threshold",
            QueryKind::Compare { .. } => "compare",
            QueryKind::Debug { .. } => "debug",
        },
        items: selected,
        stats,
        patterns,
    })
}

/// Exact execution over a fully populated accuracy table.
pub fn execute(
    query: &Query,
    plans: &[TaskPlan],
    table: &AccuracyTable,
    taxonomy: Option<&Taxonomy>,
) -> Result<QueryResult, QueryError> {
    query.validate()?;
    let scoped = query.scope.select(plans, taxonomy)?;
    if scoped.is_empty() {
        return Err(QueryError::EmptyScope);
    }
    let values = task_values(query, &scoped, table)?;
    answer_from_values(query, &scoped, &values)
}
