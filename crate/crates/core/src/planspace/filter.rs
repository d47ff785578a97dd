use serde::{Deserialize, Serialize};

use super::{FieldValue, PlanError, PlanTable, TaskPlan};
use crate::taxonomy::Taxonomy;

/// One field-level condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Clause {
    Equals { field: String, value: FieldValue },
    InSet { field: String, values: Vec<FieldValue> },
    /// Field holds `concept` or one of its descendants.
    AncestorOf { field: String, concept: String },
}

impl Clause {
    pub fn field(&self) -> &str {
        match self {
            Clause::Equals { field, .. } | Clause::InSet { field, .. } | Clause::AncestorOf { field, .. } => field,
        }
    }

    fn matches(&self, plan: &TaskPlan, taxonomy: Option<&Taxonomy>) -> Result<bool, PlanError> {
        let got = plan.get(self.field()).unwrap_or(&FieldValue::Null);
        Ok(match self {
            Clause::Equals { value, .. } => got.canonical() == value.canonical(),
            Clause::InSet { values, .. } => {
                let g = got.canonical();
                values.iter().any(|v| v.canonical() == g)
            }
            Clause::AncestorOf { concept, .. } => {
                let tax = taxonomy.ok_or(PlanError::NoTaxonomy)?;
                match got.as_str() {
                    Some(v) => v == concept || (tax.contains(v) && tax.contains(concept) && tax.is_ancestor(concept, v).unwrap_or(false)),
                    None => false,
                }
            }
        })
    }
}

/// Conjunction of clauses; the empty filter accepts everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlanFilter {
    pub clauses: Vec<Clause>,
}

impl PlanFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn with(mut self, clause: Clause) -> Self {
        self.clauses.push(clause);
        self
    }

    pub fn eq(field: &str, value: impl Into<FieldValue>) -> Self {
        Self::all().with(Clause::Equals {
            field: field.into(),
            value: value.into(),
        })
    }

    pub fn matches(&self, plan: &TaskPlan, taxonomy: Option<&Taxonomy>) -> Result<bool, PlanError> {
        for c in &self.clauses {
            if !c.matches(plan, taxonomy)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Rows satisfying every clause, in their original order.
pub fn filter_plans(
    table: &PlanTable,
    filter: &PlanFilter,
    taxonomy: Option<&Taxonomy>,
) -> Result<PlanTable, PlanError> {
    for c in &filter.clauses {
        if table.schema().field(c.field()).is_none() {
            return Err(PlanError::UnknownField(c.field().to_string()));
        }
    }
    let mut rows = Vec::new();
    for r in table.rows() {
        if filter.matches(r, taxonomy)? {
            rows.push(r.clone());
        }
    }
    Ok(PlanTable::from_sorted(table.schema().clone(), rows))
}
