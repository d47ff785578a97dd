//! The pipeline driven through the `taskgen` binary on the mini world.

use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use taskgen_core::evalrun::ResultsDb;
use taskgen_core::queryeng::{execute, AccuracyTable, Query};
use taskgen_core::testkit::MiniWorld;
use taskgen_server::data;

use crate::common::{ensure, Check};

const BIN: &str = env!("CARGO_BIN_EXE_taskgen");

fn ok(root: &Path, args: &[&str]) -> Result<Output, String> {
    let out = Command::new(BIN)
        .args(args)
        .env("TMA_DATA_DIR", root)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(out)
}

fn json_out(out: &Output) -> Result<Value, String> {
    serde_json::from_slice(&out.stdout).map_err(|e| format!("stdout is not JSON: {e}"))
}

fn world() -> Result<(tempfile::TempDir, PathBuf), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().join("data");
    MiniWorld::write_to(&root).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(root.join("plans")).map_err(|e| e.to_string())?;
    Ok((dir, root))
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Records sorted by (model, plan, index), one JSON line each.
fn sorted_dump(db: &Path) -> Result<String, String> {
    let db = ResultsDb::open(db).map_err(|e| e.to_string())?;
    db.verify().map_err(|e| e.to_string())?;
    Ok(db
        .sorted_records()
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect())
}

pub fn pipeline() -> Check {
    let start = Instant::now();
    let (_d, root) = world()?;
    let plans = root.join("plans");
    for g in ["2d-how-many", "2d-what-attribute", "sg-what-object"] {
        ok(&root, &["enumerate", "--generator", g, "--out", p(&plans.join(format!("{g}.plans")))])?;
    }
    let plan_count = data::load_plans(&[plans.clone()]).map_err(|e| e.to_string())?.len();

    let inst = root.join("instances");
    ok(&root, &["generate", "--instances", "1", "--out", p(&inst)])?;
    let manifest = std::fs::read_to_string(inst.join("manifest.jsonl")).map_err(|e| e.to_string())?;
    let lines: Vec<Value> = manifest.lines().filter_map(|l| serde_json::from_str(l).ok()).collect();
    ensure(lines.len() == plan_count, || format!("{} manifest lines for {plan_count} plans", lines.len()))?;
    let png = lines
        .iter()
        .filter_map(|l| l["image_path"].as_str())
        .find(|s| s.ends_with(".png"))
        .ok_or("no rendered image in the manifest")?;
    ensure(inst.join(png).exists(), || format!("{png} missing"))?;

    let db = root.join("results.jsonl");
    let eval = ["eval", "--n", "3", "--model", "oracle:gold", "--model", "random:guess:4"];
    let report = json_out(&ok(&root, &eval)?)?;
    ensure(report["new_records"] == 2 * 3 * plan_count, || format!("first eval: {report}"))?;
    let again = json_out(&ok(&root, &eval)?)?;
    ensure(again["new_records"] == 0, || format!("rerun added records: {again}"))?;

    let spec = root.join("q.json");
    let q = json!({
        "kind": "threshold",
        "params": {"theta": 0.5, "direction": "above"},
        "scope": {"generators": ["2d-what-attribute"]},
        "target": {"group": ["attribute_value"]},
        "models": ["gold", "guess"],
        "inner_agg": "min",
        "mine_support": 0.5
    });
    std::fs::write(&spec, q.to_string()).map_err(|e| e.to_string())?;
    let result_path = root.join("result.json");
    ok(&root, &["query", "--spec", p(&spec), "--out", p(&result_path)])?;
    let got: Value = serde_json::from_str(&std::fs::read_to_string(&result_path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let query: Query = serde_json::from_value(q).map_err(|e| e.to_string())?;
    let all = data::load_plans(&[plans]).map_err(|e| e.to_string())?;
    let table = AccuracyTable::from_db(&ResultsDb::open(&db).map_err(|e| e.to_string())?);
    let tax = taskgen_core::taxonomy::load_taxonomy(&root.join("taxonomy.txt")).map_err(|e| e.to_string())?;
    let want = execute(&query, &all, &table, Some(&tax)).map_err(|e| e.to_string())?;
    ensure(got == serde_json::to_value(&want).unwrap(), || "query output differs from in-process execution".into())?;

    let scores = json_out(&ok(&root, &["surprise", "--model", "guess", "--k", "3", "--limit", "5"])?)?;
    ensure(scores.as_array().map(Vec::len) == Some(5), || format!("surprise: {scores}"))?;
    json_out(&ok(&root, &["mine", "--generator", "2d-how-many", "--support", "0.5"])?)?;
    let topk = root.join("topk.json");
    std::fs::write(&topk, json!({"kind": "top-k", "params": {"k": 5}, "models": ["guess"]}).to_string())
        .map_err(|e| e.to_string())?;
    let r = json_out(&ok(&root, &["approx", "--spec", p(&topk), "--budget", "20", "--strategy", "active"])?)?;
    ensure(r["consumed"] == 20, || format!("approx consumed {}", r["consumed"]))?;

    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{plan_count} plans through enumerate, generate, eval, query, surprise, mine, approx ({secs:.1}s)"))
}

pub fn kill_and_resume() -> Check {
    let start = Instant::now();
    let (_d, root) = world()?;
    let plans = root.join("plans");
    ok(&root, &["enumerate", "--generator", "2d-how-many", "--out", p(&plans.join("h.plans"))])?;
    // a stdio model that answers `(A)` slowly, so the run can be interrupted
    let script = root.join("slow.sh");
    std::fs::write(&script, "while read l; do sleep 0.005; echo '{\"raw_text\":\"(A)\"}'; done\n")
        .map_err(|e| e.to_string())?;
    let slow = format!("stdio:slow:sh {}", p(&script));
    let args = |db: &Path| -> Vec<String> {
        ["eval", "--n", "3", "--max-parallel", "2", "--model", "oracle:gold", "--model", &slow, "--db", p(db)]
            .iter()
            .map(|s| s.to_string())
            .collect()
    };
    let run = |db: &Path| {
        let a = args(db);
        ok(&root, &a.iter().map(String::as_str).collect::<Vec<_>>())
    };

    let full = root.join("full.jsonl");
    run(&full)?;

    let resumed = root.join("resumed.jsonl");
    let mut child = Command::new(BIN)
        .args(args(&resumed))
        .env("TMA_DATA_DIR", &root)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let deadline = Instant::now() + Duration::from_secs(30);
    loop {
        let text = std::fs::read_to_string(&resumed).unwrap_or_default();
        if text.contains("\"model\":\"slow\"") || Instant::now() > deadline {
            break;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    child.kill().map_err(|e| e.to_string())?;
    child.wait().map_err(|e| e.to_string())?;
    let partial = ResultsDb::open(&resumed).map_err(|e| e.to_string())?.records().len();
    let total = ResultsDb::open(&full).map_err(|e| e.to_string())?.records().len();
    ensure(partial < total, || "run finished before it could be interrupted".into())?;

    run(&resumed)?;
    ensure(sorted_dump(&resumed)? == sorted_dump(&full)?, || "resumed records differ".into())?;
    let summary = |db: &Path| std::fs::read(ResultsDb::summary_path(db)).map_err(|e| e.to_string());
    ensure(summary(&resumed)? == summary(&full)?, || "accuracy summaries differ".into())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("killed at {partial}/{total} records, resumed byte-identical ({secs:.1}s)"))
}
