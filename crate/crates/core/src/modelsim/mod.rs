//! Simulated models with a known accuracy per plan. A profile adds a base
//! rate, per-(field, value) modifiers and a linear term over the plan
//! embedding, clamped to [1/4, 1]. The adapter answers correctly with that
//! probability, deterministically per instance.

pub mod synthetic;

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approx::{ApproxError, Embedder, HashedEmbedder};
use crate::evalrun::{option_letter, AdapterError, AnswerRequest, ModelAdapter};
use crate::instance::TaskInstance;
use crate::planspace::TaskPlan;
use crate::util::{rng_from, stable_hash64};

pub const FLOOR: f64 = 0.25;
/// Largest allowed L2 norm of the embedding weights.
pub const MAX_WEIGHT_NORM: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("profile modifier refers to field `{field}`, which plan {plan} lacks")]
    UnknownField { field: String, plan: String },
    #[error("invalid profile: {0}")]
    Invalid(String),
    #[error("cannot read profile {path}: {msg}")]
    Io { path: String, msg: String },
    #[error(transparent)]
    Embed(#[from] ApproxError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Modifier {
    /// Restricts the modifier to plans of one generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    pub field: String,
    pub value: String,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillProfile {
    pub base: f64,
    #[serde(default)]
    pub modifiers: Vec<Modifier>,
    /// Weights over embedding coordinates; empty means no smooth term.
    #[serde(default)]
    pub weights: Vec<f64>,
}

impl SkillProfile {
    pub fn constant(base: f64) -> Self {
        Self {
            base,
            modifiers: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !self.base.is_finite() {
            return Err(SimError::Invalid("base must be finite".into()));
        }
        if self.modifiers.iter().any(|m| !m.delta.is_finite()) || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(SimError::Invalid("non-finite modifier or weight".into()));
        }
        let norm = self.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        if norm > MAX_WEIGHT_NORM + 1e-12 {
            return Err(SimError::Invalid(format!("weight norm {norm:.3} exceeds {MAX_WEIGHT_NORM}")));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let io = |msg: String| SimError::Io {
            path: path.display().to_string(),
            msg,
        };
        let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        let p: Self = serde_json::from_str(&text).map_err(|e| io(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

/// Closed-form accuracy of `profile` on `plan`.
pub fn true_accuracy(profile: &SkillProfile, plan: &TaskPlan, embedder: &dyn Embedder) -> Result<f64, SimError> {
    let mut acc = profile.base;
    for m in &profile.modifiers {
        if m.generator.as_deref().is_some_and(|g| g != plan.generator) {
            continue;
        }
        let v = plan.get(&m.field).ok_or_else(|| SimError::UnknownField {
            field: m.field.clone(),
            plan: plan.id.to_string(),
        })?;
        if !v.is_null() && v.to_string() == m.value {
            acc += m.delta;
        }
    }
    if !profile.weights.is_empty() {
        let e = embedder.embed(plan)?;
        if e.len() != profile.weights.len() {
            return Err(SimError::Invalid(format!(
                "{} weights for a {}-dimensional embedding",
                profile.weights.len(),
                e.len()
            )));
        }
        acc += e.iter().zip(&profile.weights).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(acc.clamp(FLOOR, 1.0))
}

/// How a simulated reply is phrased; all three are extractable.
fn phrase(inst: &TaskInstance, pick: usize, style: u64) -> String {
    let letter = option_letter(pick);
    let name = &inst.options[pick];
    match style % 3 {
        0 => format!("({letter})"),
        1 => format!("I think it is {name}."),
        _ => format!("{letter} {name}"),
    }
}

/// Simulated model speaking the adapter interface.
pub struct SimAdapter {
    id: String,
    profile: SkillProfile,
    embedder: Box<dyn Embedder>,
    salt: u64,
}

impl SimAdapter {
    pub fn new(id: impl Into<String>, profile: SkillProfile, salt: u64) -> Result<Self, SimError> {
        profile.validate()?;
        Ok(Self {
            id: id.into(),
            profile,
            embedder: Box::new(HashedEmbedder::default()),
            salt,
        })
    }

    pub fn with_embedder(mut self, embedder: Box<dyn Embedder>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn profile(&self) -> &SkillProfile {
        &self.profile
    }

    pub fn accuracy(&self, plan: &TaskPlan) -> Result<f64, SimError> {
        true_accuracy(&self.profile, plan, self.embedder.as_ref())
    }

    /// Reply for one instance, a pure function of (profile, salt, plan, seed).
    pub fn reply(&self, plan: &TaskPlan, inst: &TaskInstance) -> Result<String, SimError> {
        let p = self.accuracy(plan)?;
        let id_hash = stable_hash64(self.id.as_bytes());
        let mut rng = rng_from(&[self.salt, id_hash, plan.id.0, inst.seed]);
        let n = inst.options.len();
        let pick = if rng.random::<f64>() < p || n == 1 {
            inst.answer_index
        } else {
            let j = rng.random_range(0..n - 1);
            if j >= inst.answer_index {
                j + 1
            } else {
                j
            }
        };
        Ok(phrase(inst, pick, rng.random()))
    }
}

impl ModelAdapter for SimAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn answer(&self, plan: &TaskPlan, inst: &TaskInstance, _: &AnswerRequest) -> Result<String, AdapterError> {
        self.reply(plan, inst).map_err(|e| AdapterError::Protocol(e.to_string()))
    }

    fn needs_visual(&self) -> bool {
        false
    }
}
