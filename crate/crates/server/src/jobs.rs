//! In-memory registry of asynchronous jobs.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Approximate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobRecord {
    pub id: String,
    pub kind: JobKind,
    pub params: serde_json::Value,
    pub params_hash: String,
    pub state: JobState,
    pub progress: Progress,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Outcome of a submission.
#[derive(Debug)]
pub enum Submit {
    Created(JobRecord),
    Existing(JobRecord),
    /// The id is taken by a job with different parameters.
    Conflict(String),
}

pub fn params_hash(kind: JobKind, params: &serde_json::Value) -> String {
    let mut h = Sha256::new();
    h.update(format!("{kind:?}").as_bytes());
    h.update(params.to_string().as_bytes());
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub struct JobStore {
    jobs: Mutex<HashMap<String, JobRecord>>,
    permits: Arc<Semaphore>,
}

impl JobStore {
    /// Store whose jobs run at most `workers` at a time.
    pub fn new(workers: usize) -> Self {
        Self {
            jobs: Mutex::new(HashMap::new()),
            permits: Arc::new(Semaphore::new(workers.max(1))),
        }
    }

    pub fn permits(&self) -> Arc<Semaphore> {
        self.permits.clone()
    }

    /// Registers a job unless one with the same id exists. Without an
    /// explicit id the parameter hash is the id, so resubmission is a no-op.
    pub fn submit(&self, kind: JobKind, params: serde_json::Value, id: Option<String>, total: usize) -> Submit {
        let hash = params_hash(kind, &params);
        let id = id.unwrap_or_else(|| format!("{}-{hash}", format!("{kind:?}").to_lowercase()));
        let mut jobs = self.jobs.lock().expect("job lock");
        if let Some(j) = jobs.get(&id) {
            return if j.params_hash == hash {
                Submit::Existing(j.clone())
            } else {
                Submit::Conflict(id)
            };
        }
        let rec = JobRecord {
            id: id.clone(),
            kind,
            params,
            params_hash: hash,
            state: JobState::Pending,
            progress: Progress { done: 0, total },
            result: None,
            error: None,
        };
        jobs.insert(id, rec.clone());
        Submit::Created(rec)
    }

    pub fn get(&self, id: &str) -> Option<JobRecord> {
        self.jobs.lock().expect("job lock").get(id).cloned()
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut JobRecord)) {
        if let Some(j) = self.jobs.lock().expect("job lock").get_mut(id) {
            f(j);
        }
    }

    pub fn set_progress(&self, id: &str, done: usize) {
        self.update(id, |j| j.progress.done = done);
    }

    /// Moves a job forward; backwards transitions and transitions out of a
    /// finished state are ignored.
    fn advance(&self, id: &str, state: JobState, f: impl FnOnce(&mut JobRecord)) {
        self.update(id, |j| {
            if state > j.state && !matches!(j.state, JobState::Done | JobState::Failed) {
                j.state = state;
                f(j);
            }
        });
    }

    pub fn start(&self, id: &str) {
        self.advance(id, JobState::Running, |_| {});
    }

    pub fn finish(&self, id: &str, result: serde_json::Value) {
        self.advance(id, JobState::Done, |j| j.result = Some(result));
    }

    pub fn fail(&self, id: &str, error: String) {
        self.advance(id, JobState::Failed, |j| j.error = Some(error));
    }
}
