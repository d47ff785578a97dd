//! Standalone simulated model speaking the adapter wire protocol. It
//! regenerates each instance from the plan id and seed in the request, so
//! it knows the answer without trusting the caller.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use taskgen_core::evalrun::{AnswerRequest, AnswerResponse};
use taskgen_core::modelsim::SimAdapter;
use taskgen_core::planspace::{GeneratorRegistry, PlanId, SourceData, TaskPlan};

pub struct SimService {
    registry: GeneratorRegistry,
    source: SourceData,
    plans: HashMap<PlanId, TaskPlan>,
    adapter: SimAdapter,
}

impl SimService {
    pub fn new(registry: GeneratorRegistry, source: SourceData, plans: Vec<TaskPlan>, adapter: SimAdapter) -> Self {
        Self {
            registry,
            source,
            plans: plans.into_iter().map(|p| (p.id, p)).collect(),
            adapter,
        }
    }

    pub fn respond(&self, req: &AnswerRequest) -> Result<AnswerResponse, String> {
        let plan = self
            .plans
            .get(&req.plan_id)
            .ok_or_else(|| format!("unknown plan {}", req.plan_id))?;
        let inst = self
            .registry
            .generate(plan, &self.source, req.seed)
            .map_err(|e| e.to_string())?;
        if inst.instance_id != req.instance_id || inst.question != req.question {
            return Err(format!("request does not match instance {}", inst.instance_id));
        }
        let raw_text = self.adapter.reply(plan, &inst).map_err(|e| e.to_string())?;
        Ok(AnswerResponse { raw_text })
    }

    fn respond_line(&self, line: &str) -> String {
        let out = serde_json::from_str::<AnswerRequest>(line)
            .map_err(|e| format!("bad request: {e}"))
            .and_then(|r| self.respond(&r));
        match out {
            Ok(r) => serde_json::to_string(&r).expect("response serializes"),
            Err(e) => serde_json::json!({ "error": e }).to_string(),
        }
    }
}

/// Answers one JSON request per input line until end of input.
pub fn serve_stdio(svc: &SimService, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(output, "{}", svc.respond_line(&line))?;
        output.flush()?;
    }
    Ok(())
}

pub fn router(svc: Arc<SimService>) -> Router {
    Router::new().route("/answer", post(answer)).with_state(svc)
}

async fn answer(
    State(svc): State<Arc<SimService>>,
    Json(req): Json<AnswerRequest>,
) -> Result<Json<AnswerResponse>, (StatusCode, Json<serde_json::Value>)> {
    let svc2 = svc.clone();
    let out = tokio::task::spawn_blocking(move || svc2.respond(&req))
        .await
        .map_err(|e| (StatusCode::INTERNAL_SERVER_ERROR, Json(serde_json::json!({ "error": e.to_string() }))))?;
    out.map(Json)
        .map_err(|e| (StatusCode::UNPROCESSABLE_ENTITY, Json(serde_json::json!({ "error": e }))))
}
