//! A cheap text-only generator with a 1,000-plan space and a smooth profile
//! over it, used to benchmark the approximation strategies against a fully
//! measured ground truth.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::Serialize;
use thiserror::Error;

use super::{SimAdapter, SimError, SkillProfile, MAX_WEIGHT_NORM};
use crate::approx::{
    approximate, hit_rate, mean_rank, ApproxError, ApproxOptions, Budget, FnEvaluator, GpParams, HashedEmbedder,
    Strategy,
};
use crate::evalrun::{run_evaluation, EvalConfig, EvalContext, EvalError, ModelAdapter, ResultsDb};
use crate::instance::{GenerationError, TaskInstance, Visual};
use crate::planspace::{
    FieldKind, FieldSpec, FieldValue, GeneratorRegistry, PlanError, PlanId, PlanSchema, SourceData, TaskPlan,
};
use crate::queryeng::{answer_from_values, Order, Query, QueryError, QueryKind};
use crate::taxonomy::Taxonomy;
use crate::util::{rng_from, stable_hash64};

pub const GENERATOR: &str = "synthetic-lookup";
pub const FAMILIES: usize = 20;
pub const VARIANTS: usize = 10;
pub const LEVELS: usize = 5;

pub fn schema() -> PlanSchema {
    PlanSchema::new(
        GENERATOR,
        vec![
            FieldSpec::new("family", FieldKind::StringEnum, "family"),
            FieldSpec::new("variant", FieldKind::StringEnum, "variant"),
            FieldSpec::new("level", FieldKind::Integer, ""),
        ],
    )
    .expect("distinct field names")
}

pub fn family(i: usize) -> String {
    format!("f{i:02}")
}

pub fn variant(i: usize) -> String {
    format!("v{i}")
}

/// Every (family, variant, level) combination.
pub fn plans() -> Vec<TaskPlan> {
    let s = schema();
    let mut out = Vec::with_capacity(FAMILIES * VARIANTS * LEVELS);
    for f in 0..FAMILIES {
        for v in 0..VARIANTS {
            for l in 1..=LEVELS as i64 {
                let values = [
                    ("family", FieldValue::text(family(f))),
                    ("variant", FieldValue::text(variant(v))),
                    ("level", FieldValue::Int(l)),
                ];
                out.push(TaskPlan::new(&s, values).expect("values match schema"));
            }
        }
    }
    out.sort_by_key(|p| p.id);
    out
}

fn label(plan: &TaskPlan) -> String {
    format!(
        "{}-{}-{}",
        plan.text("family").unwrap_or("?"),
        plan.text("variant").unwrap_or("?"),
        plan.int("level").unwrap_or(0)
    )
}

/// Four-option lookup question. The answer slot is drawn from the seed.
pub fn generate(plan: &TaskPlan, seed: u64) -> Result<TaskInstance, GenerationError> {
    if plan.generator != GENERATOR {
        return Err(GenerationError::InvalidPlan(format!("not a {GENERATOR} plan")));
    }
    let answer = label(plan);
    let mut rng = rng_from(&[plan.id.0, seed]);
    let mut options = vec![answer.clone()];
    while options.len() < 4 {
        let o = format!(
            "{}-{}-{}",
            family(rng.random_range(0..FAMILIES)),
            variant(rng.random_range(0..VARIANTS)),
            rng.random_range(1..=LEVELS)
        );
        if !options.contains(&o) {
            options.push(o);
        }
    }
    options.shuffle(&mut rng);
    let answer_index = options.iter().position(|o| *o == answer).expect("answer kept");
    Ok(TaskInstance {
        instance_id: TaskInstance::instance_id_for(plan.id, seed),
        plan_id: plan.id,
        generator: GENERATOR.into(),
        seed,
        visual: Visual::Image(format!("synthetic/{}", plan.id)),
        question: format!("Which code is shown for family {}?", plan.text("family").unwrap_or("?")),
        options,
        answer_index,
    })
}

/// Registers the synthetic generator. It needs no source data.
pub fn register(registry: &mut GeneratorRegistry) -> Result<(), crate::planspace::PlanError> {
    registry.register_fn(schema(), |_, _| Ok(plans()), |plan, _, seed| generate(plan, seed))
}

/// Per-atom effects of the smooth profile: a bump over families, a gentler
/// slope over variants and a small level term.
fn atom_effects() -> BTreeMap<String, f64> {
    let mut e = BTreeMap::new();
    for f in 0..FAMILIES {
        let d = f as f64 - 4.0;
        e.insert(format!("family={}", family(f)), 0.22 * (-d * d / 6.0).exp() - 0.04);
    }
    for v in 0..VARIANTS {
        e.insert(format!("variant={}", variant(v)), 0.09 - 0.02 * v as f64);
    }
    for l in 1..=LEVELS {
        e.insert(format!("level={l}"), 0.02 * (3.0 - l as f64));
    }
    e
}

/// Smooth profile for `dim`-dimensional hashed embeddings. Each atom's
/// effect is written into the coordinate it hashes to, so the accuracy is
/// linear in the embedding. Weights are scaled down if they exceed the norm
/// bound.
pub fn smooth_profile(base: f64, dim: usize) -> Result<SkillProfile, SimError> {
    HashedEmbedder::new(dim)?;
    // Every synthetic plan has four atoms (three fields plus the generator),
    // so each coordinate of the normalized embedding has magnitude 1/2.
    let mut w = vec![0.0; dim];
    for (atom, effect) in atom_effects() {
        let h = stable_hash64(atom.as_bytes());
        let coord = (h % dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        w[coord] += 2.0 * sign * effect;
    }
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > MAX_WEIGHT_NORM {
        let scale = MAX_WEIGHT_NORM / norm;
        w.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(SkillProfile {
        base,
        modifiers: Vec::new(),
        weights: w,
    })
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchConfig {
    /// Instances per task when measuring the ground truth.
    pub n: u32,
    pub budget: usize,
    pub k: usize,
    pub seeds: u64,
    pub base: f64,
    pub dim: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n: 15,
            budget: 200,
            k: 10,
            seeds: 20,
            base: 0.55,
            dim: crate::approx::DEFAULT_DIM,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyScore {
    pub strategy: Strategy,
    pub hit_rates: Vec<f64>,
    pub mean_rank: Vec<f64>,
    /// Largest evaluator call count over all seeds.
    pub max_calls: usize,
}

impl StrategyScore {
    pub fn mean_hit_rate(&self) -> f64 {
        self.hit_rates.iter().sum::<f64>() / self.hit_rates.len().max(1) as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub scope: usize,
    pub scores: Vec<StrategyScore>,
}

impl BenchReport {
    pub fn score(&self, s: Strategy) -> Option<&StrategyScore> {
        self.scores.iter().find(|x| x.strategy == s)
    }
}

/// Measures the smooth-profile model on every synthetic plan through the
/// evaluation pipeline, then runs each strategy on a top-k query for every
/// seed and scores it against the exact answer on the measured values.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    let mut registry = GeneratorRegistry::new();
    register(&mut registry)?;
    let source = SourceData::new(Taxonomy::default());
    let ctx = EvalContext {
        registry: &registry,
        source: &source,
    };
    let profile = smooth_profile(cfg.base, cfg.dim)?;
    let model = "smooth";
    let adapter: Arc<dyn ModelAdapter> = Arc::new(SimAdapter::new(model, profile, 7)?);
    let all = plans();
    let eval_cfg = EvalConfig {
        n: cfg.n,
        ..EvalConfig::default()
    };
    let mut db = ResultsDb::in_memory();
    run_evaluation(&[adapter], &all, ctx, &eval_cfg, &mut db, |_, _| {})?;
    let truth: BTreeMap<PlanId, f64> = all
        .iter()
        .map(|p| (p.id, db.accuracy(model, p.id).unwrap_or(0.0)))
        .collect();

    let refs: Vec<&TaskPlan> = all.iter().collect();
    let query = Query::new(QueryKind::TopK { k: cfg.k, order: Order::Desc }, &[model]);
    let full = Query::new(QueryKind::TopK { k: all.len(), order: Order::Desc }, &[model]);
    let exact_top = answer_from_values(&query, &refs, &truth)?.keys();
    let ranking = answer_from_values(&full, &refs, &truth)?.keys();
    let embedder = HashedEmbedder::new(cfg.dim)?;

    let mut scores = Vec::new();
    for strategy in Strategy::ALL {
        let mut score = StrategyScore {
            strategy,
            hit_rates: Vec::new(),
            mean_rank: Vec::new(),
            max_calls: 0,
        };
        for seed in 0..cfg.seeds {
            let mut calls = 0usize;
            let mut ev = FnEvaluator(|p: &TaskPlan, _: &str| {
                calls += 1;
                truth[&p.id]
            });
            let opts = ApproxOptions {
                strategy,
                budget: Budget::new(cfg.budget),
                seed,
                gp: GpParams::default(),
            };
            let r = approximate(&query, &refs, &embedder, &mut ev, opts)?;
            let got = r.answer.keys();
            score.hit_rates.push(hit_rate(&got, &exact_top)?);
            score.mean_rank.push(mean_rank(&got, &ranking)?);
            score.max_calls = score.max_calls.max(calls);
        }
        scores.push(score);
    }
    Ok(BenchReport {
        config: cfg.clone(),
        scope: all.len(),
        scores,
    })
}
