//! Rendered task instances and the error type shared by every generator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planspace::PlanId;
use crate::taxonomy::TaxonomyError;

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("source data invalid for generator: {0}")]
    SourceValidation(String),
    #[error("plan is not valid for this generator: {0}")]
    InvalidPlan(String),
    #[error("catalog cannot satisfy plan: {0}")]
    InsufficientCatalog(String),
    #[error("distractor pool exhausted: {0}")]
    DistractorsExhausted(String),
    #[error("scene graph no longer supports plan: {0}")]
    StaleGraph(String),
    #[error("rendering failed: {0}")]
    Render(String),
}

impl From<TaxonomyError> for GenerationError {
    fn from(e: TaxonomyError) -> Self {
        match e {
            TaxonomyError::InsufficientCandidates { .. } => Self::DistractorsExhausted(e.to_string()),
            other => Self::InvalidPlan(other.to_string()),
        }
    }
}

/// Visual input attached to an instance: rendered bytes for composed grids,
/// an asset reference for scene-graph tasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Visual {
    Png(Vec<u8>),
    Image(String),
    Video(String),
    /// Composition was skipped; only the text side of the instance is set.
    Unrendered,
}

impl Visual {
    pub fn is_video(&self) -> bool {
        matches!(self, Visual::Video(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskInstance {
    pub instance_id: String,
    pub plan_id: PlanId,
    pub generator: String,
    pub seed: u64,
    pub visual: Visual,
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: usize,
}

impl TaskInstance {
    pub fn instance_id_for(plan_id: PlanId, seed: u64) -> String {
        format!("{plan_id}-{seed:016x}")
    }

    pub fn answer(&self) -> &str {
        &self.options[self.answer_index]
    }

    /// Splits an instance id back into `(plan id, seed)`.
    pub fn parse_instance_id(id: &str) -> Option<(PlanId, u64)> {
        let (p, s) = id.split_once('-')?;
        let plan = PlanId(crate::util::parse_id(p)?);
        let seed = crate::util::parse_id(s)?;
        Some((plan, seed))
    }
}

/// One line of an instance manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub instance_id: String,
    pub plan_id: PlanId,
    pub seed: u64,
    pub image_path: String,
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: usize,
}

/// Question, options and answer before any image is attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionSpec {
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: usize,
}

impl QuestionSpec {
    /// Places `truth` among `distractors` in a seeded order.
    pub fn shuffled<R: rand::Rng + ?Sized>(
        question: String,
        truth: String,
        distractors: Vec<String>,
        rng: &mut R,
    ) -> Self {
        use rand::seq::SliceRandom;
        let mut options = Vec::with_capacity(distractors.len() + 1);
        options.push(truth.clone());
        options.extend(distractors);
        options.shuffle(rng);
        let answer_index = options
            .iter()
            .position(|o| *o == truth)
            .expect("truth was inserted");
        Self {
            question,
            options,
            answer_index,
        }
    }
}
