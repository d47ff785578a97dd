//! Model adapters. In-process adapters answer directly; `HttpAdapter` and
//! `StdioAdapter` speak the JSON wire protocol to an external process.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::time::Duration;

use base64::Engine;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompt::{build_prompt, option_letter, PromptStyle};
use crate::instance::{TaskInstance, Visual};
use crate::planspace::{PlanId, TaskPlan};
use crate::util::mix_seeds;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireOption {
    pub id: String,
    pub text: String,
}

/// One request of the wire protocol. Exactly one of the three visual fields
/// is set. `plan_id` and `seed` let a simulated model recover its ground
/// truth without parsing the question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub instance_id: String,
    pub question: String,
    pub options: Vec<WireOption>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset_ref: Option<String>,
    pub prompt: String,
    pub style: PromptStyle,
    pub plan_id: PlanId,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerResponse {
    pub raw_text: String,
}

impl AnswerRequest {
    /// Builds the request for `inst`. Composed images are referenced by
    /// `image_path` when `png_path` is given, otherwise inlined as a data URI
    /// in `asset_ref`.
    pub fn new(inst: &TaskInstance, style: PromptStyle, png_path: Option<&str>) -> Self {
        let (mut image_path, mut video_path, mut asset_ref) = (None, None, None);
        match &inst.visual {
            Visual::Png(bytes) => match png_path {
                Some(p) => image_path = Some(p.to_string()),
                None => {
                    let b64 = base64::engine::general_purpose::STANDARD.encode(bytes);
                    asset_ref = Some(format!("data:image/png;base64,{b64}"));
                }
            },
            Visual::Image(p) => image_path = Some(p.clone()),
            Visual::Video(p) => video_path = Some(p.clone()),
            Visual::Unrendered => {}
        }
        Self {
            instance_id: inst.instance_id.clone(),
            question: inst.question.clone(),
            options: inst
                .options
                .iter()
                .enumerate()
                .map(|(i, t)| WireOption {
                    id: option_letter(i).to_string(),
                    text: t.clone(),
                })
                .collect(),
            image_path,
            video_path,
            asset_ref,
            prompt: build_prompt(&inst.question, &inst.options, style, inst.visual.is_video()),
            style,
            plan_id: inst.plan_id,
            seed: inst.seed,
        }
    }
}

pub trait ModelAdapter: Send + Sync {
    fn id(&self) -> &str;

    /// Raw model text for one instance.
    fn answer(&self, plan: &TaskPlan, inst: &TaskInstance, req: &AnswerRequest) -> Result<String, AdapterError>;

    /// False when `answer` never looks at the visual, so composition can be skipped.
    fn needs_visual(&self) -> bool {
        true
    }
}

/// Always names the correct option.
#[derive(Debug, Clone)]
pub struct OracleAdapter {
    pub id: String,
}

impl ModelAdapter for OracleAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn needs_visual(&self) -> bool {
        false
    }

    fn answer(&self, _: &TaskPlan, inst: &TaskInstance, _: &AnswerRequest) -> Result<String, AdapterError> {
        Ok(format!("({})", option_letter(inst.answer_index)))
    }
}

/// Replies with the same letter regardless of the question.
#[derive(Debug, Clone)]
pub struct FixedLetterAdapter {
    pub id: String,
    pub letter: char,
}

impl ModelAdapter for FixedLetterAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn needs_visual(&self) -> bool {
        false
    }

    fn answer(&self, _: &TaskPlan, _: &TaskInstance, _: &AnswerRequest) -> Result<String, AdapterError> {
        Ok(format!("({})", self.letter))
    }
}

/// Picks an option uniformly, deterministically per (salt, instance).
#[derive(Debug, Clone)]
pub struct UniformRandomAdapter {
    pub id: String,
    pub salt: u64,
}

impl ModelAdapter for UniformRandomAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn needs_visual(&self) -> bool {
        false
    }

    fn answer(&self, _: &TaskPlan, inst: &TaskInstance, _: &AnswerRequest) -> Result<String, AdapterError> {
        let h = mix_seeds(&[self.salt, inst.plan_id.0, inst.seed]);
        let pick = (h % inst.options.len() as u64) as usize;
        Ok(format!("({})", option_letter(pick)))
    }
}

fn with_retries<T>(attempts: u32, mut f: impl FnMut() -> Result<T, AdapterError>) -> Result<T, AdapterError> {
    let mut last = String::new();
    for attempt in 0..attempts.max(1) {
        match f() {
            Ok(v) => return Ok(v),
            Err(e) => {
                last = e.to_string();
                if attempt + 1 < attempts {
                    std::thread::sleep(Duration::from_millis(50 << attempt.min(6)));
                }
            }
        }
    }
    Err(AdapterError::Exhausted {
        attempts: attempts.max(1),
        last,
    })
}

/// POSTs requests to `{base_url}/answer`.
pub struct HttpAdapter {
    id: String,
    url: String,
    agent: ureq::Agent,
    attempts: u32,
}

impl HttpAdapter {
    pub fn new(id: impl Into<String>, base_url: &str, timeout: Duration, attempts: u32) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            id: id.into(),
            url: format!("{}/answer", base_url.trim_end_matches('/')),
            agent,
            attempts,
        }
    }
}

impl ModelAdapter for HttpAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn answer(&self, _: &TaskPlan, _: &TaskInstance, req: &AnswerRequest) -> Result<String, AdapterError> {
        with_retries(self.attempts, || {
            let mut resp = self
                .agent
                .post(&self.url)
                .send_json(req)
                .map_err(|e| AdapterError::Transport(e.to_string()))?;
            let body: AnswerResponse = resp
                .body_mut()
                .read_json()
                .map_err(|e| AdapterError::Protocol(e.to_string()))?;
            Ok(body.raw_text)
        })
    }
}

struct StdioChild {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Drop for StdioChild {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Talks to a child process, one JSON request line in, one response line
/// out. The child is restarted after a transport failure.
pub struct StdioAdapter {
    id: String,
    program: String,
    args: Vec<String>,
    attempts: u32,
    child: Mutex<Option<StdioChild>>,
}

impl StdioAdapter {
    pub fn new(id: impl Into<String>, program: impl Into<String>, args: Vec<String>, attempts: u32) -> Self {
        Self {
            id: id.into(),
            program: program.into(),
            args,
            attempts,
            child: Mutex::new(None),
        }
    }

    fn spawn(&self) -> Result<StdioChild, AdapterError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AdapterError::Transport(format!("spawn {}: {e}", self.program)))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = BufReader::new(child.stdout.take().expect("piped"));
        Ok(StdioChild { child, stdin, stdout })
    }

    fn round_trip(&self, line: &str) -> Result<String, AdapterError> {
        let mut guard = self.child.lock();
        if guard.is_none() {
            *guard = Some(self.spawn()?);
        }
        let c = guard.as_mut().expect("just spawned");
        let io = |e: std::io::Error| AdapterError::Transport(e.to_string());
        let result = (|| {
            c.stdin.write_all(line.as_bytes()).map_err(io)?;
            c.stdin.write_all(b"\n").map_err(io)?;
            c.stdin.flush().map_err(io)?;
            let mut out = String::new();
            if c.stdout.read_line(&mut out).map_err(io)? == 0 {
                return Err(AdapterError::Transport("child closed its output".into()));
            }
            let resp: AnswerResponse =
                serde_json::from_str(out.trim_end()).map_err(|e| AdapterError::Protocol(e.to_string()))?;
            Ok(resp.raw_text)
        })();
        if result.is_err() {
            *guard = None;
        }
        result
    }
}

impl ModelAdapter for StdioAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn answer(&self, _: &TaskPlan, _: &TaskInstance, req: &AnswerRequest) -> Result<String, AdapterError> {
        let line = serde_json::to_string(req).map_err(|e| AdapterError::Protocol(e.to_string()))?;
        with_retries(self.attempts, || self.round_trip(&line))
    }
}
