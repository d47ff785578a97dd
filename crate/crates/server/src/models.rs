//! Model adapters named on the command line.
//!
//! ```text
//! oracle:<id>                 always correct
//! fixed:<id>:<letter>         always the same letter
//! random:<id>[:<salt>]        uniform guess
//! sim:<id>:<profile.json>[:<salt>]
//! http:<id>:<base url>        POST <base url>/answer
//! stdio:<id>:<command line>   one JSON line per request
//! ```

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use taskgen_core::evalrun::{FixedLetterAdapter, HttpAdapter, ModelAdapter, OracleAdapter, StdioAdapter, UniformRandomAdapter};
use taskgen_core::modelsim::{SimAdapter, SimError, SkillProfile};
use thiserror::Error;

pub const ATTEMPTS: u32 = 3;

#[derive(Debug, Error)]
pub enum ModelSpecError {
    #[error("bad model spec `{spec}`: {msg}")]
    Syntax { spec: String, msg: String },
    #[error(transparent)]
    Profile(#[from] SimError),
}

fn bad(spec: &str, msg: &str) -> ModelSpecError {
    ModelSpecError::Syntax {
        spec: spec.into(),
        msg: msg.into(),
    }
}

fn salt(spec: &str, s: Option<&str>) -> Result<u64, ModelSpecError> {
    s.map_or(Ok(0), |s| s.parse().map_err(|_| bad(spec, "salt must be an unsigned integer")))
}

pub fn parse_model(spec: &str) -> Result<Arc<dyn ModelAdapter>, ModelSpecError> {
    let (kind, rest) = spec.split_once(':').ok_or_else(|| bad(spec, "expected <kind>:<id>..."))?;
    let (id, arg) = match rest.split_once(':') {
        Some((id, arg)) => (id, Some(arg)),
        None => (rest, None),
    };
    if id.is_empty() {
        return Err(bad(spec, "empty model id"));
    }
    let id = id.to_string();
    Ok(match kind {
        "oracle" => Arc::new(OracleAdapter { id }),
        "fixed" => {
            let letter = arg
                .and_then(|a| {
                    let mut c = a.chars();
                    c.next().filter(|l| l.is_ascii_uppercase() && c.next().is_none())
                })
                .ok_or_else(|| bad(spec, "fixed needs one uppercase letter"))?;
            Arc::new(FixedLetterAdapter { id, letter })
        }
        "random" => Arc::new(UniformRandomAdapter { id, salt: salt(spec, arg)? }),
        "sim" => {
            let arg = arg.ok_or_else(|| bad(spec, "sim needs a profile path"))?;
            let (path, s) = match arg.rsplit_once(':') {
                Some((p, s)) if s.chars().all(|c| c.is_ascii_digit()) => (p, Some(s)),
                _ => (arg, None),
            };
            let profile = SkillProfile::load(Path::new(path))?;
            Arc::new(SimAdapter::new(id, profile, salt(spec, s)?)?)
        }
        "http" => {
            let url = arg.ok_or_else(|| bad(spec, "http needs a base url"))?;
            Arc::new(HttpAdapter::new(id, url, Duration::from_secs(60), ATTEMPTS))
        }
        "stdio" => {
            let mut words = arg.unwrap_or_default().split_whitespace().map(String::from);
            let program = words.next().ok_or_else(|| bad(spec, "stdio needs a command"))?;
            Arc::new(StdioAdapter::new(id, program, words.collect(), ATTEMPTS))
        }
        _ => return Err(bad(spec, "unknown kind")),
    })
}
