use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Taxonomy;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("catalog line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate object id `{0}`")]
    DuplicateId(String),
    #[error("object `{id}` has category `{category}` which is not a taxonomy concept")]
    UnknownCategory { id: String, category: String },
    #[error("object `{0}` has an empty sprite path")]
    EmptySprite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeType {
    Color,
    Material,
    Shape,
}

impl AttributeType {
    pub const ALL: [AttributeType; 3] = [Self::Color, Self::Material, Self::Shape];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Color => "color",
            Self::Material => "material",
            Self::Shape => "shape",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

impl fmt::Display for AttributeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRecord {
    pub id: String,
    pub category: String,
    #[serde(default)]
    pub attributes: BTreeMap<AttributeType, Vec<String>>,
    pub sprite: PathBuf,
}

impl ObjectRecord {
    pub fn has_value(&self, ty: AttributeType, value: &str) -> bool {
        self.attributes
            .get(&ty)
            .is_some_and(|vs| vs.iter().any(|v| v == value))
    }

    pub fn values(&self, ty: AttributeType) -> &[String] {
        self.attributes.get(&ty).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Validated collection of objects. Relative sprite paths resolve against
/// `base_dir` when one is set.
#[derive(Debug, Clone, Default)]
pub struct ObjectCatalog {
    objects: Vec<ObjectRecord>,
    index: HashMap<String, usize>,
    base_dir: Option<PathBuf>,
}

impl ObjectCatalog {
    pub fn new(objects: Vec<ObjectRecord>, taxonomy: &Taxonomy) -> Result<Self, CatalogError> {
        let mut index = HashMap::with_capacity(objects.len());
        for (i, o) in objects.iter().enumerate() {
            if index.insert(o.id.clone(), i).is_some() {
                return Err(CatalogError::DuplicateId(o.id.clone()));
            }
            if !taxonomy.contains(&o.category) {
                return Err(CatalogError::UnknownCategory {
                    id: o.id.clone(),
                    category: o.category.clone(),
                });
            }
            if o.sprite.as_os_str().is_empty() {
                return Err(CatalogError::EmptySprite(o.id.clone()));
            }
        }
        Ok(Self {
            objects,
            index,
            base_dir: None,
        })
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(dir.into());
        self
    }

    pub fn objects(&self) -> &[ObjectRecord] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ObjectRecord> {
        self.index.get(id).map(|&i| &self.objects[i])
    }

    pub fn sprite_path(&self, obj: &ObjectRecord) -> PathBuf {
        match &self.base_dir {
            Some(base) if obj.sprite.is_relative() => base.join(&obj.sprite),
            _ => obj.sprite.clone(),
        }
    }

    /// Distinct categories, sorted.
    pub fn categories(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.objects.iter().map(|o| o.category.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Distinct `(type, value)` pairs, sorted.
    pub fn attribute_values(&self) -> Vec<(AttributeType, String)> {
        let mut set = BTreeSet::new();
        for o in &self.objects {
            for (ty, vs) in &o.attributes {
                for v in vs {
                    set.insert((*ty, v.clone()));
                }
            }
        }
        set.into_iter().collect()
    }

    pub fn values_of(&self, ty: AttributeType) -> Vec<String> {
        self.attribute_values()
            .into_iter()
            .filter(|(t, _)| *t == ty)
            .map(|(_, v)| v)
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for o in &self.objects {
            out.push_str(&serde_json::to_string(o).expect("object record serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn parse_catalog_records(text: &str) -> Result<Vec<ObjectRecord>, CatalogError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ObjectRecord = serde_json::from_str(line).map_err(|e| CatalogError::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Loads a line-delimited JSON catalog; sprite paths resolve against the
/// catalog file's directory.
pub fn load_catalog(path: &Path, taxonomy: &Taxonomy) -> Result<ObjectCatalog, CatalogError> {
    let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let records = parse_catalog_records(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(ObjectCatalog::new(records, taxonomy)?.with_base_dir(base))
}
