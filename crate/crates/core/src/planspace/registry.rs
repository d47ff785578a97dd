use std::collections::BTreeMap;
use std::sync::Arc;

use super::{PlanError, PlanSchema, PlanTable, TaskPlan};
use crate::gridgen::SpriteCache;
use crate::instance::{GenerationError, TaskInstance};
use crate::sggen::SceneGraphCorpus;
use crate::taxonomy::{ObjectCatalog, Taxonomy};

/// Everything a generator may read. Grid generators need the catalog,
/// scene-graph generators the corpus; both use the taxonomy.
#[derive(Debug, Default)]
pub struct SourceData {
    pub taxonomy: Taxonomy,
    pub catalog: Option<ObjectCatalog>,
    pub corpus: Option<SceneGraphCorpus>,
    pub sprites: SpriteCache,
}

impl SourceData {
    pub fn new(taxonomy: Taxonomy) -> Self {
        Self {
            taxonomy,
            ..Self::default()
        }
    }

    pub fn with_catalog(mut self, catalog: ObjectCatalog) -> Self {
        self.catalog = Some(catalog);
        self
    }

    pub fn with_corpus(mut self, corpus: SceneGraphCorpus) -> Self {
        self.corpus = Some(corpus);
        self
    }

    pub fn catalog(&self) -> Result<&ObjectCatalog, GenerationError> {
        self.catalog
            .as_ref()
            .ok_or_else(|| GenerationError::SourceValidation("an object catalog is required".into()))
    }

    pub fn corpus(&self) -> Result<&SceneGraphCorpus, GenerationError> {
        self.corpus
            .as_ref()
            .ok_or_else(|| GenerationError::SourceValidation("a scene-graph corpus is required".into()))
    }
}

/// A task generator: declares a plan schema, enumerates every valid plan
/// from source data, and renders instances of a plan.
pub trait TaskGenerator: Send + Sync {
    fn schema(&self) -> &PlanSchema;

    fn id(&self) -> &str {
        &self.schema().generator
    }

    fn enumerate(&self, source: &SourceData) -> Result<Vec<TaskPlan>, GenerationError>;

    fn generate(
        &self,
        plan: &TaskPlan,
        source: &SourceData,
        seed: u64,
    ) -> Result<TaskInstance, GenerationError>;

    /// Like `generate` but may leave the visual as `Visual::Unrendered`.
    /// Question, options and answer must match `generate` exactly.
    fn generate_unrendered(
        &self,
        plan: &TaskPlan,
        source: &SourceData,
        seed: u64,
    ) -> Result<TaskInstance, GenerationError> {
        self.generate(plan, source, seed)
    }
}

type EnumerateFn = dyn Fn(&PlanSchema, &SourceData) -> Result<Vec<TaskPlan>, GenerationError> + Send + Sync;
type GenerateFn = dyn Fn(&TaskPlan, &SourceData, u64) -> Result<TaskInstance, GenerationError> + Send + Sync;

struct FnGenerator {
    schema: PlanSchema,
    enumerate: Box<EnumerateFn>,
    generate: Box<GenerateFn>,
}

impl TaskGenerator for FnGenerator {
    fn schema(&self) -> &PlanSchema {
        &self.schema
    }

    fn enumerate(&self, source: &SourceData) -> Result<Vec<TaskPlan>, GenerationError> {
        (self.enumerate)(&self.schema, source)
    }

    fn generate(&self, plan: &TaskPlan, source: &SourceData, seed: u64) -> Result<TaskInstance, GenerationError> {
        (self.generate)(plan, source, seed)
    }
}

#[derive(Default, Clone)]
pub struct GeneratorRegistry {
    generators: BTreeMap<String, Arc<dyn TaskGenerator>>,
}

impl std::fmt::Debug for GeneratorRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.generators.keys()).finish()
    }
}

impl GeneratorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding the five grid generators and the six scene-graph
    /// generators with default configuration.
    pub fn builtin() -> Self {
        let mut r = Self::new();
        for g in crate::gridgen::builtin_generators() {
            r.register(g).expect("builtin ids are unique");
        }
        for g in crate::sggen::builtin_generators() {
            r.register(g).expect("builtin ids are unique");
        }
        r
    }

    pub fn register(&mut self, generator: Arc<dyn TaskGenerator>) -> Result<(), PlanError> {
        let id = generator.id().to_string();
        if self.generators.contains_key(&id) {
            return Err(PlanError::DuplicateGenerator(id));
        }
        self.generators.insert(id, generator);
        Ok(())
    }

    /// Registers a generator from a schema and two callbacks.
    pub fn register_fn<E, G>(&mut self, schema: PlanSchema, enumerate: E, generate: G) -> Result<(), PlanError>
    where
        E: Fn(&PlanSchema, &SourceData) -> Result<Vec<TaskPlan>, GenerationError> + Send + Sync + 'static,
        G: Fn(&TaskPlan, &SourceData, u64) -> Result<TaskInstance, GenerationError> + Send + Sync + 'static,
    {
        self.register(Arc::new(FnGenerator {
            schema,
            enumerate: Box::new(enumerate),
            generate: Box::new(generate),
        }))
    }

    pub fn list(&self) -> Vec<&str> {
        self.generators.keys().map(String::as_str).collect()
    }

    pub fn get(&self, id: &str) -> Result<&Arc<dyn TaskGenerator>, PlanError> {
        self.generators
            .get(id)
            .ok_or_else(|| PlanError::UnknownGenerator(id.to_string()))
    }

    pub fn generate(&self, plan: &TaskPlan, source: &SourceData, seed: u64) -> Result<TaskInstance, GenerationError> {
        let g = self
            .generators
            .get(&plan.generator)
            .ok_or_else(|| GenerationError::UnknownGenerator(plan.generator.clone()))?;
        g.generate(plan, source, seed)
    }

    pub fn generate_unrendered(
        &self,
        plan: &TaskPlan,
        source: &SourceData,
        seed: u64,
    ) -> Result<TaskInstance, GenerationError> {
        let g = self
            .generators
            .get(&plan.generator)
            .ok_or_else(|| GenerationError::UnknownGenerator(plan.generator.clone()))?;
        g.generate_unrendered(plan, source, seed)
    }
}

/// Enumerates every valid plan of `generator` over `source`, sorted by id.
pub fn enumerate_plans(
    registry: &GeneratorRegistry,
    generator: &str,
    source: &SourceData,
) -> Result<PlanTable, PlanError> {
    let g = registry.get(generator)?;
    let rows = g.enumerate(source)?;
    PlanTable::new(g.schema().clone(), rows)
}
