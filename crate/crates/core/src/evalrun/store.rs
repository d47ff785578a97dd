//! Append-only results store: one JSON record per line plus a summary
//! sidecar of per-(model, plan) accuracy that is rewritten atomically after
//! every committed batch.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planspace::PlanId;
use crate::util::write_atomic;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt record at line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
    #[error("record is inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub model: String,
    pub instance_id: String,
    pub plan_id: PlanId,
    /// Position of the instance within its task, `0..n`.
    pub index: u32,
    pub raw_text: String,
    pub extracted: Option<usize>,
    pub answer_index: usize,
    pub correct: bool,
}

impl EvalRecord {
    fn check(&self) -> Result<(), String> {
        if self.correct != (self.extracted == Some(self.answer_index)) {
            return Err(format!("{}: correct flag disagrees with extraction", self.instance_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub correct: u32,
    pub count: u32,
}

impl Cell {
    pub fn accuracy(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.correct as f64 / self.count as f64
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SummaryRow {
    model: String,
    plan_id: PlanId,
    correct: u32,
    count: u32,
    accuracy: f64,
}

/// Results database. With a path it persists to `<path>` and
/// `<path>.summary.json`; without one it lives in memory.
#[derive(Debug, Default)]
pub struct ResultsDb {
    path: Option<PathBuf>,
    records: Vec<EvalRecord>,
    cells: BTreeMap<(String, PlanId), Cell>,
    seen: BTreeMap<(String, PlanId), BTreeSet<u32>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl ResultsDb {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens or creates the store at `path`. A final line cut short by a
    /// crash is dropped and the file truncated to the last full record.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let mut db = Self {
            path: Some(path.to_path_buf()),
            ..Self::default()
        };
        if !path.exists() {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            }
            File::create(path).map_err(io_err(path))?;
            db.write_summary()?;
            return Ok(db);
        }
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(io_err(path))?;
        let mut good_len = 0usize;
        let mut offset = 0usize;
        let lines: Vec<&str> = text.split_inclusive('\n').collect();
        for (i, raw) in lines.iter().enumerate() {
            offset += raw.len();
            let complete = raw.ends_with('\n');
            let line = raw.trim_end();
            if line.is_empty() {
                good_len = offset;
                continue;
            }
            match serde_json::from_str::<EvalRecord>(line) {
                Ok(rec) if complete => {
                    rec.check().map_err(|msg| StoreError::Corrupt { line: i + 1, msg })?;
                    db.insert(rec);
                    good_len = offset;
                }
                // a trailing line without its newline is an interrupted append
                _ if !complete && i + 1 == lines.len() => break,
                Ok(_) => unreachable!("only the last line can lack a newline"),
                Err(e) => {
                    return Err(StoreError::Corrupt {
                        line: i + 1,
                        msg: e.to_string(),
                    })
                }
            }
        }
        if good_len < text.len() {
            let f = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
            f.set_len(good_len as u64).map_err(io_err(path))?;
        }
        db.write_summary()?;
        Ok(db)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn summary_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".summary.json");
        PathBuf::from(s)
    }

    /// Returns false for a duplicate (model, plan, index).
    fn insert(&mut self, rec: EvalRecord) -> bool {
        let key = (rec.model.clone(), rec.plan_id);
        if !self.seen.entry(key.clone()).or_default().insert(rec.index) {
            return false;
        }
        let cell = self.cells.entry(key).or_default();
        cell.count += 1;
        cell.correct += rec.correct as u32;
        self.records.push(rec);
        true
    }

    /// Appends a batch: records are written and synced before the summary
    /// is replaced, so readers of the summary only see committed data.
    /// Records duplicating an existing (model, plan, index) are skipped.
    pub fn append(&mut self, batch: Vec<EvalRecord>) -> Result<usize, StoreError> {
        let mut fresh = Vec::with_capacity(batch.len());
        for rec in batch {
            rec.check().map_err(StoreError::Inconsistent)?;
            let key = (rec.model.clone(), rec.plan_id);
            if self.seen.get(&key).is_some_and(|s| s.contains(&rec.index)) {
                continue;
            }
            fresh.push(rec);
        }
        if fresh.is_empty() {
            return Ok(0);
        }
        if let Some(path) = self.path.clone() {
            let mut buf = String::new();
            for rec in &fresh {
                buf.push_str(&serde_json::to_string(rec).expect("records serialize"));
                buf.push('\n');
            }
            let mut f = OpenOptions::new().append(true).open(&path).map_err(io_err(&path))?;
            f.write_all(buf.as_bytes()).map_err(io_err(&path))?;
            f.sync_data().map_err(io_err(&path))?;
        }
        let n = fresh.len();
        for rec in fresh {
            self.insert(rec);
        }
        self.write_summary()?;
        Ok(n)
    }

    fn write_summary(&self) -> Result<(), StoreError> {
        let Some(path) = &self.path else { return Ok(()) };
        let rows: Vec<SummaryRow> = self
            .cells
            .iter()
            .map(|((m, p), c)| SummaryRow {
                model: m.clone(),
                plan_id: *p,
                correct: c.correct,
                count: c.count,
                accuracy: c.accuracy(),
            })
            .collect();
        let sp = Self::summary_path(path);
        let body = serde_json::to_vec_pretty(&rows).expect("summary serializes");
        write_atomic(&sp, &body).map_err(io_err(&sp))
    }

    pub fn records(&self) -> &[EvalRecord] {
        &self.records
    }

    /// Records ordered by (model, plan, index); independent of commit order.
    pub fn sorted_records(&self) -> Vec<EvalRecord> {
        let mut v = self.records.clone();
        v.sort_by(|a, b| (&a.model, a.plan_id, a.index).cmp(&(&b.model, b.plan_id, b.index)));
        v
    }

    pub fn cell(&self, model: &str, plan: PlanId) -> Option<Cell> {
        self.cells.get(&(model.to_string(), plan)).copied()
    }

    pub fn accuracy(&self, model: &str, plan: PlanId) -> Option<f64> {
        self.cell(model, plan).map(|c| c.accuracy())
    }

    pub fn cells(&self) -> &BTreeMap<(String, PlanId), Cell> {
        &self.cells
    }

    /// Instance indices already recorded for a pair.
    pub fn indices(&self, model: &str, plan: PlanId) -> BTreeSet<u32> {
        self.seen.get(&(model.to_string(), plan)).cloned().unwrap_or_default()
    }

    pub fn models(&self) -> Vec<String> {
        let s: BTreeSet<&String> = self.cells.keys().map(|(m, _)| m).collect();
        s.into_iter().cloned().collect()
    }

    /// Recomputes the accuracy view from raw records and compares.
    pub fn verify(&self) -> Result<(), StoreError> {
        let mut again: BTreeMap<(String, PlanId), Cell> = BTreeMap::new();
        for r in &self.records {
            let c = again.entry((r.model.clone(), r.plan_id)).or_default();
            c.count += 1;
            c.correct += r.correct as u32;
        }
        if again != self.cells {
            return Err(StoreError::Inconsistent("accuracy view differs from records".into()));
        }
        Ok(())
    }
}
