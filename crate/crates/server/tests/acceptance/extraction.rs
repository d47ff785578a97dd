use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;
use taskgen_core::evalrun::{build_prompt, extract_option, PromptStyle};

use crate::common::{ensure, Check};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/acceptance/fixtures").join(name)
}

#[derive(Deserialize)]
struct PromptCase {
    file: String,
    style: String,
    video: bool,
    question: String,
    options: Vec<String>,
}

pub fn prompts_golden() -> Check {
    let text = std::fs::read_to_string(fixture("prompt_cases.json")).map_err(|e| e.to_string())?;
    let cases: Vec<PromptCase> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    for c in &cases {
        let style = PromptStyle::parse(&c.style).ok_or_else(|| format!("bad style {}", c.style))?;
        let want = std::fs::read(fixture(&c.file)).map_err(|e| format!("{}: {e}", c.file))?;
        let got = build_prompt(&c.question, &c.options, style, c.video);
        ensure(got.as_bytes() == want.as_slice(), || {
            format!("{} differs:\n{got:?}\n{:?}", c.file, String::from_utf8_lossy(&want))
        })?;
    }
    Ok(format!("{} golden files byte-identical", cases.len()))
}

#[derive(Deserialize)]
struct ExtractionCase {
    form: String,
    raw: String,
    options: Vec<String>,
    expected: Option<usize>,
}

pub fn extraction_fixtures() -> Check {
    let text = std::fs::read_to_string(fixture("extraction.jsonl")).map_err(|e| e.to_string())?;
    let mut per_form: BTreeMap<String, usize> = BTreeMap::new();
    let mut wrong = Vec::new();
    let mut total = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let c: ExtractionCase = serde_json::from_str(line).map_err(|e| format!("{line}: {e}"))?;
        total += 1;
        *per_form.entry(c.form.clone()).or_default() += 1;
        let got = extract_option(&c.raw, &c.options);
        if got != c.expected {
            wrong.push(format!("{:?} -> {got:?}, want {:?}", c.raw, c.expected));
        }
    }
    ensure(total == 60, || format!("fixture has {total} cases"))?;
    ensure(wrong.is_empty(), || format!("{} wrong: {}", wrong.len(), wrong.join("; ")))?;
    let forms: Vec<String> = per_form.iter().map(|(f, n)| format!("{f}={n}")).collect();
    Ok(format!("{total}/{total} correct ({})", forms.join(" ")))
}
