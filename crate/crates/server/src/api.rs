//! HTTP API over a loaded snapshot of plans, source data and results.
//! Handlers only translate between HTTP and the core library.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query as UrlQuery, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use taskgen_core::approx::{
    approximate, embed_all, ApproxError, ApproxOptions, Budget, Embedder, GpParams, Strategy, TableEvaluator,
    TaskEvaluator,
};
use taskgen_core::evalrun::{build_prompt, PromptStyle};
use taskgen_core::instance::Visual;
use taskgen_core::planspace::{GeneratorRegistry, PlanFilter, PlanId, SourceData, TaskPlan};
use taskgen_core::queryeng::{execute, surprisingness, AccuracyTable, Query, QueryError};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::data::{self, DataError, SourcePaths};
use crate::jobs::{JobKind, JobStore, Submit};

/// Immutable view served to requests; replaced wholesale on reload.
pub struct Snapshot {
    pub registry: GeneratorRegistry,
    pub source: SourceData,
    pub plans: Vec<TaskPlan>,
    index: HashMap<PlanId, usize>,
    pub table: AccuracyTable,
    pub embedder: Box<dyn Embedder>,
}

impl Snapshot {
    pub fn new(
        registry: GeneratorRegistry,
        source: SourceData,
        mut plans: Vec<TaskPlan>,
        table: AccuracyTable,
        embedder: Box<dyn Embedder>,
    ) -> Self {
        plans.sort_by_key(|p| p.id);
        plans.dedup_by_key(|p| p.id);
        let index = plans.iter().enumerate().map(|(i, p)| (p.id, i)).collect();
        Self {
            registry,
            source,
            plans,
            index,
            table,
            embedder,
        }
    }

    pub fn plan(&self, id: PlanId) -> Option<&TaskPlan> {
        self.index.get(&id).map(|&i| &self.plans[i])
    }
}

/// Files a snapshot is loaded from.
#[derive(Debug, Clone, Default)]
pub struct ServeConfig {
    pub source: SourcePaths,
    pub plans: Vec<PathBuf>,
    pub db: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
}

impl ServeConfig {
    pub fn load(&self) -> Result<Snapshot, DataError> {
        let source = self.source.load()?;
        let plans = data::load_plans(&self.plans)?;
        let table = match &self.db {
            Some(p) => AccuracyTable::from_db(&data::open_existing_db(p)?),
            None => AccuracyTable::new(),
        };
        let embedder = data::embedder(self.embeddings.as_deref())?;
        Ok(Snapshot::new(data::registry(), source, plans, table, embedder))
    }
}

#[derive(Clone)]
pub struct AppState {
    snapshot: Arc<RwLock<Arc<Snapshot>>>,
    config: Option<Arc<ServeConfig>>,
    jobs: Arc<JobStore>,
}

impl AppState {
    pub fn new(snapshot: Snapshot, config: Option<ServeConfig>, workers: usize) -> Self {
        Self {
            snapshot: Arc::new(RwLock::new(Arc::new(snapshot))),
            config: config.map(Arc::new),
            jobs: Arc::new(JobStore::new(workers)),
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        Self::bad_request(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let code = match self.status {
            StatusCode::BAD_REQUEST => "bad_request",
            StatusCode::NOT_FOUND => "not_found",
            StatusCode::CONFLICT => "conflict",
            _ => "internal",
        };
        let body = serde_json::json!({ "error": { "code": code, "status": self.status.as_u16(), "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

type Params<T> = Result<UrlQuery<T>, QueryRejection>;

fn params<T>(p: Params<T>) -> ApiResult<T> {
    p.map(|UrlQuery(q)| q).map_err(|e| ApiError::bad_request(e.body_text()))
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

/// CORS for `origin`, or any origin when unset.
pub fn cors(origin: Option<&str>) -> Result<CorsLayer, String> {
    let allow = match origin {
        Some(o) => AllowOrigin::exact(HeaderValue::from_str(o).map_err(|e| format!("bad origin `{o}`: {e}"))?),
        None => AllowOrigin::any(),
    };
    Ok(CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([axum::http::Method::GET, axum::http::Method::POST])
        .allow_headers([header::CONTENT_TYPE]))
}

pub fn router(state: AppState, cors_layer: CorsLayer) -> Router {
    Router::new()
        .route("/generators", get(generators))
        .route("/plans", get(plans))
        .route("/query", post(query))
        .route("/approx", post(approx))
        .route("/jobs/{id}", get(job))
        .route("/instances/{plan_id}", get(instance))
        .route("/surprisingness", get(surprise))
        .route("/stats", get(stats))
        .route("/reload", post(reload))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .layer(cors_layer)
        .with_state(state)
}

#[derive(Serialize)]
struct GeneratorInfo {
    id: String,
    fields: Vec<taskgen_core::planspace::FieldSpec>,
    plans: usize,
}

async fn generators(State(st): State<AppState>) -> Json<Vec<GeneratorInfo>> {
    let snap = st.snapshot();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &snap.plans {
        *counts.entry(p.generator.as_str()).or_default() += 1;
    }
    let out = snap
        .registry
        .list()
        .into_iter()
        .map(|id| GeneratorInfo {
            id: id.to_string(),
            fields: snap.registry.get(id).expect("listed").schema().fields.clone(),
            plans: counts.get(id).copied().unwrap_or(0),
        })
        .collect();
    Json(out)
}

#[derive(Deserialize)]
struct PlansParams {
    generator: Option<String>,
    filter: Option<String>,
    offset: Option<usize>,
    limit: Option<usize>,
}

#[derive(Serialize)]
struct PlansPage {
    total: usize,
    offset: usize,
    plans: Vec<TaskPlan>,
}

const DEFAULT_PAGE: usize = 100;

async fn plans(State(st): State<AppState>, q: Params<PlansParams>) -> ApiResult<Json<PlansPage>> {
    let q = params(q)?;
    let snap = st.snapshot();
    let filter: PlanFilter = match &q.filter {
        Some(f) => serde_json::from_str(f).map_err(|e| ApiError::bad_request(format!("bad filter: {e}")))?,
        None => PlanFilter::all(),
    };
    let scope = taskgen_core::queryeng::Scope {
        generators: q.generator.into_iter().collect(),
        filter,
    };
    let selected = scope.select(&snap.plans, Some(&snap.source.taxonomy))?;
    let offset = q.offset.unwrap_or(0);
    let page = selected
        .iter()
        .skip(offset)
        .take(q.limit.unwrap_or(DEFAULT_PAGE))
        .map(|p| (*p).clone())
        .collect();
    Ok(Json(PlansPage {
        total: selected.len(),
        offset,
        plans: page,
    }))
}

async fn query(State(st): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let q: Query = parse_json(&body)?;
    let snap = st.snapshot();
    let r = tokio::task::spawn_blocking(move || execute(&q, &snap.plans, &snap.table, Some(&snap.source.taxonomy)))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(r).into_response())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxRequest {
    pub query: Query,
    pub strategy: Strategy,
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gp: Option<GpParams>,
    /// Caller-chosen job id; defaults to one derived from the parameters.
    #[serde(default, skip_serializing)]
    pub job_id: Option<String>,
}

/// Replays table measurements and reports the running count to the job.
struct ProgressEvaluator<'a> {
    inner: TableEvaluator<'a>,
    jobs: &'a JobStore,
    id: &'a str,
    done: usize,
}

impl TaskEvaluator for ProgressEvaluator<'_> {
    fn evaluate(&mut self, plans: &[&TaskPlan], models: &[String]) -> Result<Vec<Vec<f64>>, String> {
        let r = self.inner.evaluate(plans, models);
        self.done += plans.len();
        self.jobs.set_progress(self.id, self.done);
        r
    }
}

fn run_approx(snap: &Snapshot, req: &ApproxRequest, jobs: &JobStore, id: &str) -> Result<serde_json::Value, ApproxError> {
    let scope = req.query.scope.select(&snap.plans, Some(&snap.source.taxonomy))?;
    let mut ev = ProgressEvaluator {
        inner: TableEvaluator(&snap.table),
        jobs,
        id,
        done: 0,
    };
    let opts = ApproxOptions {
        strategy: req.strategy,
        budget: Budget {
            total: req.budget,
            batch: req.batch,
        },
        seed: req.seed,
        gp: req.gp.unwrap_or_default(),
    };
    let r = approximate(&req.query, &scope, snap.embedder.as_ref(), &mut ev, opts)?;
    Ok(serde_json::to_value(r).expect("result serializes"))
}

async fn approx(State(st): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: ApproxRequest = parse_json(&body)?;
    req.query.validate()?;
    if req.budget == 0 {
        return Err(ApiError::bad_request(ApproxError::BudgetZero.to_string()));
    }
    let params = serde_json::to_value(&req).expect("request serializes");
    let job = match st.jobs.submit(JobKind::Approximate, params, req.job_id.clone(), req.budget) {
        Submit::Existing(j) => return Ok((StatusCode::OK, Json(j)).into_response()),
        Submit::Conflict(id) => {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                format!("job `{id}` exists with different parameters"),
            ))
        }
        Submit::Created(j) => j,
    };
    let snap = st.snapshot();
    let jobs = st.jobs.clone();
    let id = job.id.clone();
    tokio::spawn(async move {
        let _permit = jobs.permits().acquire_owned().await.expect("semaphore is never closed");
        jobs.start(&id);
        let jobs2 = jobs.clone();
        let id2 = id.clone();
        let out = tokio::task::spawn_blocking(move || run_approx(&snap, &req, &jobs2, &id2)).await;
        match out {
            Ok(Ok(v)) => jobs.finish(&id, v),
            Ok(Err(e)) => jobs.fail(&id, e.to_string()),
            Err(e) => jobs.fail(&id, format!("worker crashed: {e}")),
        }
    });
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

async fn job(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let j = st.jobs.get(&id).ok_or_else(|| ApiError::not_found(format!("unknown job `{id}`")))?;
    Ok(Json(j).into_response())
}

#[derive(Deserialize)]
struct InstanceParams {
    seed: Option<u64>,
    format: Option<String>,
    style: Option<String>,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum VisualJson {
    Png { data: String },
    Image { path: String },
    Video { path: String },
}

#[derive(Serialize)]
struct InstanceJson {
    instance_id: String,
    plan_id: PlanId,
    generator: String,
    seed: u64,
    question: String,
    options: Vec<String>,
    answer_index: usize,
    prompt: String,
    visual: VisualJson,
}

async fn instance(
    State(st): State<AppState>,
    Path(plan_id): Path<String>,
    q: Params<InstanceParams>,
) -> ApiResult<Response> {
    let q = params(q)?;
    let id: PlanId = plan_id
        .parse()
        .map_err(|_| ApiError::bad_request(format!("bad plan id `{plan_id}`")))?;
    let style = match q.style.as_deref() {
        Some(s) => PromptStyle::parse(s).ok_or_else(|| ApiError::bad_request(format!("unknown style `{s}`")))?,
        None => PromptStyle::default(),
    };
    let snap = st.snapshot();
    if snap.plan(id).is_none() {
        return Err(ApiError::not_found(format!("unknown plan {id}")));
    }
    let seed = q.seed.unwrap_or(0);
    let snap2 = snap.clone();
    let inst = tokio::task::spawn_blocking(move || {
        let plan = snap2.plan(id).expect("checked above");
        snap2.registry.generate(plan, &snap2.source, seed)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
    .map_err(|e| ApiError::internal(e.to_string()))?;
    match q.format.as_deref() {
        Some("png") => match inst.visual {
            Visual::Png(bytes) => Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response()),
            _ => Err(ApiError::bad_request("this instance has no composed image")),
        },
        None | Some("json") => {
            let prompt = build_prompt(&inst.question, &inst.options, style, inst.visual.is_video());
            let visual = match inst.visual {
                Visual::Png(b) => VisualJson::Png {
                    data: base64::engine::general_purpose::STANDARD.encode(b),
                },
                Visual::Image(path) => VisualJson::Image { path },
                Visual::Video(path) => VisualJson::Video { path },
                Visual::Unrendered => return Err(ApiError::internal("generator returned no visual")),
            };
            Ok(Json(InstanceJson {
                instance_id: inst.instance_id,
                plan_id: inst.plan_id,
                generator: inst.generator,
                seed: inst.seed,
                question: inst.question,
                options: inst.options,
                answer_index: inst.answer_index,
                prompt,
                visual,
            })
            .into_response())
        }
        Some(f) => Err(ApiError::bad_request(format!("unknown format `{f}`"))),
    }
}

#[derive(Deserialize)]
struct SurpriseParams {
    model: String,
    k: Option<usize>,
    limit: Option<usize>,
}

const DEFAULT_NEIGHBORS: usize = 5;

async fn surprise(State(st): State<AppState>, q: Params<SurpriseParams>) -> ApiResult<Response> {
    let q = params(q)?;
    let snap = st.snapshot();
    if !snap.table.models().contains(&q.model) {
        return Err(ApiError::not_found(format!("no results for model `{}`", q.model)));
    }
    let values: BTreeMap<PlanId, f64> = snap
        .plans
        .iter()
        .filter_map(|p| snap.table.get(&q.model, p.id).map(|a| (p.id, a)))
        .collect();
    let evaluated: Vec<&TaskPlan> = snap.plans.iter().filter(|p| values.contains_key(&p.id)).collect();
    let emb = embed_all(snap.embedder.as_ref(), &evaluated).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let mut scores = surprisingness(&q.model, &values, &emb, q.k.unwrap_or(DEFAULT_NEIGHBORS))?;
    if let Some(l) = q.limit {
        scores.truncate(l);
    }
    Ok(Json(scores).into_response())
}

#[derive(Debug, Serialize, PartialEq)]
pub struct AccuracyRow {
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    pub tasks: usize,
    pub accuracy: f64,
}

#[derive(Debug, Serialize)]
pub struct Stats {
    pub plans: usize,
    pub cells: usize,
    pub models: Vec<AccuracyRow>,
    pub by_generator: Vec<AccuracyRow>,
}

/// Mean task accuracy per model and per (model, generator) over the
/// loaded plans.
pub fn accuracy_stats(snap: &Snapshot) -> Stats {
    let mut per_model: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut per_gen: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for (m, pid, acc) in snap.table.iter() {
        let Some(plan) = snap.plan(pid) else { continue };
        let e = per_model.entry(m.to_string()).or_default();
        e.0 += acc;
        e.1 += 1;
        let e = per_gen.entry((m.to_string(), plan.generator.clone())).or_default();
        e.0 += acc;
        e.1 += 1;
    }
    Stats {
        plans: snap.plans.len(),
        cells: snap.table.len(),
        models: per_model
            .into_iter()
            .map(|(model, (s, n))| AccuracyRow {
                model,
                generator: None,
                tasks: n,
                accuracy: s / n as f64,
            })
            .collect(),
        by_generator: per_gen
            .into_iter()
            .map(|((model, g), (s, n))| AccuracyRow {
                model,
                generator: Some(g),
                tasks: n,
                accuracy: s / n as f64,
            })
            .collect(),
    }
}

async fn stats(State(st): State<AppState>) -> Json<Stats> {
    Json(accuracy_stats(&st.snapshot()))
}

async fn reload(State(st): State<AppState>) -> ApiResult<Response> {
    let cfg = st
        .config
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "service was not started from files"))?;
    let snap = tokio::task::spawn_blocking(move || cfg.load())
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let body = serde_json::json!({ "plans": snap.plans.len(), "cells": snap.table.len() });
    *st.snapshot.write().expect("snapshot lock") = Arc::new(snap);
    Ok(Json(body).into_response())
}
