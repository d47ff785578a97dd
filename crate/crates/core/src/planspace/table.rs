use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{plan_id, PlanError, PlanId, PlanSchema, TaskPlan};
use crate::util::write_atomic;

pub const PLAN_FORMAT: &str = "tma-plans/1";

/// All plans of one generator, canonically ordered by plan id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanTable {
    schema: PlanSchema,
    rows: Vec<TaskPlan>,
}

impl PlanTable {
    pub fn new(schema: PlanSchema, mut rows: Vec<TaskPlan>) -> Result<Self, PlanError> {
        for r in &rows {
            if r.generator != schema.generator {
                return Err(PlanError::GeneratorMismatch {
                    expected: schema.generator.clone(),
                    found: r.generator.clone(),
                });
            }
        }
        rows.sort_by_key(|r| r.id);
        for w in rows.windows(2) {
            if w[0].id == w[1].id {
                return Err(PlanError::DuplicatePlan(w[0].id));
            }
        }
        Ok(Self { schema, rows })
    }

    pub fn empty(schema: PlanSchema) -> Self {
        Self {
            schema,
            rows: Vec::new(),
        }
    }

    /// Keeps rows in their existing order; used by filters.
    pub(crate) fn from_sorted(schema: PlanSchema, rows: Vec<TaskPlan>) -> Self {
        Self { schema, rows }
    }

    pub fn schema(&self) -> &PlanSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[TaskPlan] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<TaskPlan> {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: PlanId) -> Option<&TaskPlan> {
        self.rows
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|i| &self.rows[i])
    }

    pub fn ids(&self) -> BTreeSet<PlanId> {
        self.rows.iter().map(|r| r.id).collect()
    }

    pub fn to_text(&self) -> String {
        let header = Header {
            format: PLAN_FORMAT.into(),
            schema: self.schema.clone(),
            rows: Some(self.rows.len()),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&serde_json::to_string(r).expect("plan serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self, PlanError> {
        let mut lines = reader.lines();
        let first = lines
            .next()
            .ok_or_else(|| PlanError::Format("empty file".into()))?
            .map_err(|e| PlanError::Format(e.to_string()))?;
        let header: Header = serde_json::from_str(&first)
            .map_err(|e| PlanError::Format(format!("bad header: {e}")))?;
        if header.format != PLAN_FORMAT {
            return Err(PlanError::Format(format!(
                "unsupported format `{}` (expected `{PLAN_FORMAT}`)",
                header.format
            )));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| PlanError::Format(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: TaskPlan = serde_json::from_str(&line)
                .map_err(|e| PlanError::Format(format!("row {}: {e}", i + 1)))?;
            if plan_id(&header.schema, &row.values) != row.id {
                return Err(PlanError::Format(format!(
                    "row {}: plan id {} does not match its values",
                    i + 1,
                    row.id
                )));
            }
            rows.push(row);
        }
        if let Some(n) = header.rows {
            if n != rows.len() {
                return Err(PlanError::Format(format!(
                    "header announces {n} rows, found {}",
                    rows.len()
                )));
            }
        }
        let sorted = rows.windows(2).all(|w| w[0].id < w[1].id);
        if !sorted {
            return Err(PlanError::Format("rows are not in plan-id order".into()));
        }
        Self::new(header.schema, rows)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    schema: PlanSchema,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
}

pub fn save_table(table: &PlanTable, path: &Path) -> Result<(), PlanError> {
    write_atomic(path, table.to_text().as_bytes()).map_err(|source| PlanError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_table(path: &Path) -> Result<PlanTable, PlanError> {
    let f = std::fs::File::open(path).map_err(|source| PlanError::Io {
        path: path.display().to_string(),
        source,
    })?;
    PlanTable::parse(BufReader::new(f))
}
