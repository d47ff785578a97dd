//! Model evaluation: prompts, the adapter wire protocol, option extraction,
//! per-task accuracy over `n` instances and the results store.

mod adapter;
mod extract;
mod prompt;
mod store;

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapter::{
    AdapterError, AnswerRequest, AnswerResponse, FixedLetterAdapter, HttpAdapter, ModelAdapter, OracleAdapter,
    StdioAdapter, UniformRandomAdapter, WireOption,
};
pub use extract::extract_option;
pub use prompt::{build_prompt, option_letter, PromptStyle, DETAILED_CUE, SUCCINCT_CUE};
pub use store::{Cell, EvalRecord, ResultsDb, StoreError};

use crate::instance::{GenerationError, TaskInstance, Visual};
use crate::planspace::{GeneratorRegistry, PlanId, SourceData, TaskPlan};
use crate::util::mix_seeds;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("n must be at least 1")]
    ZeroInstances,
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n: u32,
    pub style: PromptStyle,
    pub master_seed: u64,
    pub max_parallel: usize,
    /// Where composed images are written for external adapters. When unset
    /// they are inlined in the request.
    #[serde(default)]
    pub asset_dir: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n: 15,
            style: PromptStyle::Detailed,
            master_seed: 0,
            max_parallel: 4,
            asset_dir: None,
        }
    }
}

impl EvalConfig {
    pub fn quick() -> Self {
        Self {
            n: 3,
            ..Self::default()
        }
    }
}

pub fn instance_seed(master: u64, plan: PlanId, i: u32) -> u64 {
    mix_seeds(&[master, plan.0, i as u64])
}

/// Generation inputs shared by every evaluation call.
#[derive(Clone, Copy)]
pub struct EvalContext<'a> {
    pub registry: &'a GeneratorRegistry,
    pub source: &'a SourceData,
}

fn evaluate_instance(
    adapter: &dyn ModelAdapter,
    plan: &TaskPlan,
    ctx: EvalContext<'_>,
    cfg: &EvalConfig,
    index: u32,
) -> Result<EvalRecord, EvalError> {
    let seed = instance_seed(cfg.master_seed, plan.id, index);
    let inst: TaskInstance = if adapter.needs_visual() {
        ctx.registry.generate(plan, ctx.source, seed)?
    } else {
        ctx.registry.generate_unrendered(plan, ctx.source, seed)?
    };
    let png_path = match (&inst.visual, &cfg.asset_dir) {
        (Visual::Png(bytes), Some(dir)) => {
            let p = dir.join(format!("{}.png", inst.instance_id));
            if !p.exists() {
                crate::util::write_atomic(&p, bytes)?;
            }
            Some(p.to_string_lossy().into_owned())
        }
        _ => None,
    };
    let req = AnswerRequest::new(&inst, cfg.style, png_path.as_deref());
    let raw_text = adapter.answer(plan, &inst, &req)?;
    let extracted = extract_option(&raw_text, &inst.options);
    Ok(EvalRecord {
        model: adapter.id().to_string(),
        instance_id: inst.instance_id.clone(),
        plan_id: plan.id,
        index,
        raw_text,
        extracted,
        answer_index: inst.answer_index,
        correct: extracted == Some(inst.answer_index),
    })
}

/// Evaluates one (model, plan) pair, appending any missing records, and
/// returns the pair's accuracy over its `n` instances.
pub fn evaluate_task(
    adapter: &dyn ModelAdapter,
    plan: &TaskPlan,
    ctx: EvalContext<'_>,
    cfg: &EvalConfig,
    db: &mut ResultsDb,
) -> Result<f64, EvalError> {
    if cfg.n == 0 {
        return Err(EvalError::ZeroInstances);
    }
    let have = db.indices(adapter.id(), plan.id);
    let missing: Vec<u32> = (0..cfg.n).filter(|i| !have.contains(i)).collect();
    let records: Vec<EvalRecord> = pool(cfg).install(|| {
        missing
            .par_iter()
            .map(|&i| evaluate_instance(adapter, plan, ctx, cfg, i))
            .collect::<Result<_, _>>()
    })?;
    db.append(records)?;
    Ok(db.accuracy(adapter.id(), plan.id).unwrap_or(0.0))
}

fn pool(cfg: &EvalConfig) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.max_parallel.max(1))
        .build()
        .expect("thread pool")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedPair {
    pub model: String,
    pub plan_id: PlanId,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalReport {
    pub new_records: usize,
    pub skipped_pairs: usize,
    pub completed_pairs: usize,
    pub failed: Vec<FailedPair>,
}

/// Pairs handed to the worker pool per commit.
const CHUNK_PAIRS: usize = 16;

/// Fills the (model × plan) grid. Pairs already holding `n` records are
/// skipped; partially evaluated pairs get only their missing indices. Each
/// chunk of pairs is committed in model-then-plan order, so an interrupted
/// run resumes to the same record set. `progress` is called after every
/// commit with (pairs done, pairs total).
pub fn run_evaluation(
    models: &[Arc<dyn ModelAdapter>],
    plans: &[TaskPlan],
    ctx: EvalContext<'_>,
    cfg: &EvalConfig,
    db: &mut ResultsDb,
    mut progress: impl FnMut(usize, usize),
) -> Result<EvalReport, EvalError> {
    if cfg.n == 0 {
        return Err(EvalError::ZeroInstances);
    }
    let mut report = EvalReport::default();
    let mut todo: Vec<(usize, usize, Vec<u32>)> = Vec::new();
    for (mi, m) in models.iter().enumerate() {
        for (pi, p) in plans.iter().enumerate() {
            let have = db.indices(m.id(), p.id);
            let missing: Vec<u32> = (0..cfg.n).filter(|i| !have.contains(i)).collect();
            if missing.is_empty() {
                report.skipped_pairs += 1;
            } else {
                todo.push((mi, pi, missing));
            }
        }
    }
    let total = todo.len();
    let workers = pool(cfg);
    for (done, chunk) in todo.chunks(CHUNK_PAIRS).enumerate() {
        let work: Vec<(usize, u32)> = chunk
            .iter()
            .enumerate()
            .flat_map(|(ci, (_, _, missing))| missing.iter().map(move |&i| (ci, i)))
            .collect();
        let results: Vec<(usize, Result<EvalRecord, EvalError>)> = workers.install(|| {
            work.par_iter()
                .map(|&(ci, i)| {
                    let (mi, pi, _) = &chunk[ci];
                    (ci, evaluate_instance(models[*mi].as_ref(), &plans[*pi], ctx, cfg, i))
                })
                .collect()
        });
        let mut batch = Vec::new();
        let mut errors: Vec<Option<String>> = vec![None; chunk.len()];
        for (ci, r) in results {
            match r {
                Ok(rec) => batch.push(rec),
                Err(e) => {
                    errors[ci].get_or_insert_with(|| e.to_string());
                }
            }
        }
        report.new_records += db.append(batch)?;
        for (ci, (mi, pi, _)) in chunk.iter().enumerate() {
            match errors[ci].take() {
                Some(error) => report.failed.push(FailedPair {
                    model: models[*mi].id().to_string(),
                    plan_id: plans[*pi].id,
                    error,
                }),
                None => report.completed_pairs += 1,
            }
        }
        progress((done * CHUNK_PAIRS + chunk.len()).min(total), total);
    }
    Ok(report)
}
