//! Task-plan schemas, plans and plan tables, plus the generator registry.
//!
//! A plan is one row of typed metadata. Its id is a 64-bit hash of the
//! canonical key `generator|field=value|...` with fields in schema order, so
//! ids are stable across runs and can be joined against results files.

mod filter;
mod registry;
mod table;

pub use filter::{filter_plans, Clause, PlanFilter};
pub use registry::{enumerate_plans, GeneratorRegistry, SourceData, TaskGenerator};
pub use table::{load_table, save_table, PlanTable, PLAN_FORMAT};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::util::{fmt_id, parse_id, stable_hash64};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("generator `{0}` is already registered")]
    DuplicateGenerator(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("schema `{generator}` declares field `{field}` twice")]
    DuplicateField { generator: String, field: String },
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("plan for `{generator}` is missing field `{field}`")]
    MissingField { generator: String, field: String },
    #[error("field `{field}`: {msg}")]
    BadValue { field: String, msg: String },
    #[error("plan generator `{found}` does not match table generator `{expected}`")]
    GeneratorMismatch { expected: String, found: String },
    #[error("duplicate plan id {0}")]
    DuplicatePlan(PlanId),
    #[error("ancestor-of filter needs a taxonomy")]
    NoTaxonomy,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("plan file format error: {0}")]
    Format(String),
    #[error(transparent)]
    Generation(#[from] crate::instance::GenerationError),
}

/// Stable 64-bit plan identifier, written as 16 lowercase hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlanId(pub u64);

impl fmt::Display for PlanId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_id(self.0))
    }
}

impl FromStr for PlanId {
    type Err = PlanError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_id(s)
            .map(PlanId)
            .ok_or_else(|| PlanError::Format(format!("bad plan id `{s}`")))
    }
}

impl Serialize for PlanId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PlanId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    StringEnum,
    Integer,
    Concept,
    AttributeValue,
    NodeRef,
    GraphRef,
    /// Free text such as a serialized subgraph pattern.
    Text,
    /// List of strings (co-answers).
    List,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    #[serde(default)]
    pub domain: String,
    #[serde(default)]
    pub optional: bool,
}

impl FieldSpec {
    pub fn new(name: &str, kind: FieldKind, domain: &str) -> Self {
        Self {
            name: name.into(),
            kind,
            domain: domain.into(),
            optional: false,
        }
    }

    pub fn optional(mut self) -> Self {
        self.optional = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSchema {
    pub generator: String,
    pub fields: Vec<FieldSpec>,
}

impl PlanSchema {
    pub fn new(generator: &str, fields: Vec<FieldSpec>) -> Result<Self, PlanError> {
        let mut seen = std::collections::BTreeSet::new();
        for f in &fields {
            if !seen.insert(f.name.as_str()) {
                return Err(PlanError::DuplicateField {
                    generator: generator.into(),
                    field: f.name.clone(),
                });
            }
        }
        Ok(Self {
            generator: generator.into(),
            fields,
        })
    }

    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }
}

/// Scalar (or short list) value stored in a plan field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Null,
    Int(i64),
    Text(String),
    List(Vec<String>),
}

impl FieldValue {
    pub fn text(s: impl Into<String>) -> Self {
        Self::Text(s.into())
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Self::Null)
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Self::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Self::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[String]> {
        match self {
            Self::List(v) => Some(v),
            _ => None,
        }
    }

    /// Canonical rendering used in plan keys, group keys and pattern atoms.
    pub fn canonical(&self) -> String {
        match self {
            Self::Null => "null".into(),
            Self::Int(i) => i.to_string(),
            Self::Text(s) if s == "null" => "\\null".into(),
            Self::Text(s) => escape(s),
            Self::List(v) => {
                let parts: Vec<String> = v.iter().map(|s| escape(s)).collect();
                format!("[{}]", parts.join(","))
            }
        }
    }
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Text(s) => f.write_str(s),
            other => f.write_str(&other.canonical()),
        }
    }
}

impl From<&str> for FieldValue {
    fn from(s: &str) -> Self {
        Self::Text(s.into())
    }
}

impl From<String> for FieldValue {
    fn from(s: String) -> Self {
        Self::Text(s)
    }
}

impl From<i64> for FieldValue {
    fn from(i: i64) -> Self {
        Self::Int(i)
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if matches!(c, '\\' | '|' | '=' | ',' | '[' | ']') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPlan {
    #[serde(rename = "plan_id")]
    pub id: PlanId,
    pub generator: String,
    pub values: BTreeMap<String, FieldValue>,
}

impl TaskPlan {
    /// Validates `values` against `schema` and derives the plan id.
    pub fn new<I, K>(schema: &PlanSchema, values: I) -> Result<Self, PlanError>
    where
        I: IntoIterator<Item = (K, FieldValue)>,
        K: Into<String>,
    {
        let values: BTreeMap<String, FieldValue> =
            values.into_iter().map(|(k, v)| (k.into(), v)).collect();
        for name in values.keys() {
            if schema.field(name).is_none() {
                return Err(PlanError::UnknownField(name.clone()));
            }
        }
        for f in &schema.fields {
            let v = values.get(&f.name).ok_or_else(|| PlanError::MissingField {
                generator: schema.generator.clone(),
                field: f.name.clone(),
            })?;
            check_kind(f, v)?;
        }
        let id = plan_id(schema, &values);
        Ok(Self {
            id,
            generator: schema.generator.clone(),
            values,
        })
    }

    pub fn get(&self, field: &str) -> Option<&FieldValue> {
        self.values.get(field)
    }

    pub fn text(&self, field: &str) -> Option<&str> {
        self.values.get(field).and_then(FieldValue::as_str)
    }

    pub fn int(&self, field: &str) -> Option<i64> {
        self.values.get(field).and_then(FieldValue::as_int)
    }

    /// `field=value` atoms for every non-null field, sorted by field name.
    pub fn atoms(&self) -> Vec<String> {
        self.values
            .iter()
            .filter(|(_, v)| !v.is_null())
            .map(|(k, v)| format!("{k}={}", v.canonical()))
            .collect()
    }
}

fn check_kind(f: &FieldSpec, v: &FieldValue) -> Result<(), PlanError> {
    let bad = |msg: &str| PlanError::BadValue {
        field: f.name.clone(),
        msg: msg.into(),
    };
    match (f.kind, v) {
        (_, FieldValue::Null) if f.optional => Ok(()),
        (_, FieldValue::Null) => Err(bad("null in a required field")),
        (FieldKind::Integer, FieldValue::Int(_)) => Ok(()),
        (FieldKind::Integer, _) => Err(bad("expected an integer")),
        (_, FieldValue::Int(_)) => Err(bad("expected text")),
        (FieldKind::List, FieldValue::List(_)) => Ok(()),
        (FieldKind::List, _) => Err(bad("expected a list")),
        (_, FieldValue::List(_)) => Err(bad("expected a scalar")),
        _ => Ok(()),
    }
}

/// Canonical key `generator|field=value|...` in schema field order.
pub fn canonical_key(schema: &PlanSchema, values: &BTreeMap<String, FieldValue>) -> String {
    let mut key = escape(&schema.generator);
    for f in &schema.fields {
        key.push('|');
        key.push_str(&escape(&f.name));
        key.push('=');
        key.push_str(
            &values
                .get(&f.name)
                .map(FieldValue::canonical)
                .unwrap_or_else(|| "null".into()),
        );
    }
    key
}

pub fn plan_id(schema: &PlanSchema, values: &BTreeMap<String, FieldValue>) -> PlanId {
    PlanId(stable_hash64(canonical_key(schema, values).as_bytes()))
}
