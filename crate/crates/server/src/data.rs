//! Locating and loading source data, plan tables and result databases.

use std::path::{Path, PathBuf};

use taskgen_core::approx::{ApproxError, Embedder, HashedEmbedder, TableEmbedder};
use taskgen_core::evalrun::{ResultsDb, StoreError};
use taskgen_core::modelsim::synthetic;
use taskgen_core::planspace::{load_table, GeneratorRegistry, PlanError, PlanTable, SourceData, TaskPlan};
use taskgen_core::sggen::{load_corpus, CorpusError};
use taskgen_core::taxonomy::{load_catalog, load_taxonomy, CatalogError, Taxonomy, TaxonomyError};
use thiserror::Error;

pub const DATA_DIR_ENV: &str = "TMA_DATA_DIR";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {msg}")]
    Missing { path: String, msg: String },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Embedding(#[from] ApproxError),
}

/// Paths to the source files. Unset paths fall back to conventional names
/// under the data root, and are skipped when those do not exist.
#[derive(Debug, Clone, Default)]
pub struct SourcePaths {
    pub root: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
}

impl SourcePaths {
    fn pick(&self, explicit: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
        if let Some(p) = explicit {
            return Some(p.clone());
        }
        let p = self.root.as_ref()?.join(name);
        p.exists().then_some(p)
    }

    pub fn taxonomy_path(&self) -> Option<PathBuf> {
        self.pick(&self.taxonomy, "taxonomy.txt")
    }

    pub fn catalog_path(&self) -> Option<PathBuf> {
        self.pick(&self.catalog, "catalog.jsonl")
    }

    pub fn corpus_path(&self) -> Option<PathBuf> {
        self.pick(&self.corpus, "corpus.jsonl")
    }

    pub fn load(&self) -> Result<SourceData, DataError> {
        let taxonomy = match self.taxonomy_path() {
            Some(p) => load_taxonomy(&must_exist(&p)?)?,
            None => Taxonomy::default(),
        };
        let mut source = SourceData::new(taxonomy);
        if let Some(p) = self.catalog_path() {
            let catalog = load_catalog(&must_exist(&p)?, &source.taxonomy)?;
            source = source.with_catalog(catalog);
        }
        if let Some(p) = self.corpus_path() {
            source = source.with_corpus(load_corpus(&must_exist(&p)?)?);
        }
        Ok(source)
    }
}

fn must_exist(p: &Path) -> Result<PathBuf, DataError> {
    if p.exists() {
        Ok(p.to_path_buf())
    } else {
        Err(DataError::Missing {
            path: p.display().to_string(),
            msg: "no such file".into(),
        })
    }
}

/// Built-in generators plus the synthetic lookup generator.
pub fn registry() -> GeneratorRegistry {
    let mut r = GeneratorRegistry::builtin();
    synthetic::register(&mut r).expect("synthetic id is distinct from builtin ids");
    r
}

/// Expands directories into the `*.plans` files they contain.
pub fn plan_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, DataError> {
    let mut out = Vec::new();
    for p in paths {
        let p = must_exist(p)?;
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(&p)
                .map_err(|e| DataError::Missing {
                    path: p.display().to_string(),
                    msg: e.to_string(),
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "plans"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p);
        }
    }
    Ok(out)
}

pub fn load_tables(paths: &[PathBuf]) -> Result<Vec<PlanTable>, DataError> {
    plan_files(paths)?.iter().map(|p| Ok(load_table(p)?)).collect()
}

/// Plans of every table, sorted by id with duplicates dropped.
pub fn load_plans(paths: &[PathBuf]) -> Result<Vec<TaskPlan>, DataError> {
    let mut plans: Vec<TaskPlan> = load_tables(paths)?.into_iter().flat_map(PlanTable::into_rows).collect();
    plans.sort_by_key(|p| p.id);
    plans.dedup_by_key(|p| p.id);
    Ok(plans)
}

/// Opens a results database that must already exist.
pub fn open_existing_db(path: &Path) -> Result<ResultsDb, DataError> {
    must_exist(path)?;
    Ok(ResultsDb::open(path)?)
}

pub fn embedder(path: Option<&Path>) -> Result<Box<dyn Embedder>, DataError> {
    Ok(match path {
        Some(p) => Box::new(TableEmbedder::load(&must_exist(p)?)?),
        None => Box::new(HashedEmbedder::default()),
    })
}
