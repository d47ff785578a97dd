use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use taskgen_core::approx::{
    approximate, embed_all, to_jsonl, ApproxOptions, Budget, GpParams, HashedEmbedder, PipelineEvaluator, Strategy,
    TableEvaluator,
};
use taskgen_core::evalrun::{instance_seed, run_evaluation, EvalConfig, EvalContext, ModelAdapter, PromptStyle, ResultsDb};
use taskgen_core::instance::{ManifestRecord, Visual};
use taskgen_core::modelsim::{SimAdapter, SkillProfile};
use taskgen_core::planspace::{enumerate_plans, save_table, PlanFilter, TaskPlan};
use taskgen_core::queryeng::{execute, mine_patterns, surprisingness, AccuracyTable, Query, Scope};
use taskgen_core::util::write_atomic;
use taskgen_server::api::{self, AppState, ServeConfig};
use taskgen_server::data::{self, SourcePaths, DATA_DIR_ENV};
use taskgen_server::models::parse_model;
use taskgen_server::wire::{self, SimService};

#[derive(Parser)]
#[command(name = "taskgen", version, about = "Generate multiple-choice visual tasks, evaluate models and query the results")]
struct Cli {
    /// Root for default file locations (taxonomy.txt, catalog.jsonl,
    /// corpus.jsonl, plans/, results.jsonl).
    #[arg(long, global = true, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct SourceArgs {
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// List generator ids.
    Generators,
    /// Enumerate every valid plan of a generator into a plan table.
    Enumerate {
        #[arg(long)]
        generator: String,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render instances of every plan into a directory with a manifest.
    Generate {
        #[arg(long, num_args = 1..)]
        plans: Vec<PathBuf>,
        #[command(flatten)]
        source: SourceArgs,
        /// Instances per plan.
        #[arg(long, default_value_t = 1)]
        instances: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate models on every plan, resuming an existing results file.
    Eval {
        #[arg(long, num_args = 1..)]
        plans: Vec<PathBuf>,
        #[command(flatten)]
        source: SourceArgs,
        /// Model specs such as `oracle:gold` or `sim:m1:profile.json`.
        #[arg(long = "model", required = true)]
        models: Vec<String>,
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long, default_value_t = 15)]
        n: u32,
        #[arg(long, default_value = "detailed")]
        style: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        max_parallel: usize,
        /// Write composed images here and send paths instead of inline data.
        #[arg(long)]
        asset_dir: Option<PathBuf>,
    },
    /// Answer a query exactly from a results file.
    Query {
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        plans: Vec<PathBuf>,
        #[command(flatten)]
        source: SourceArgs,
        /// Query JSON file.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Approximate a query under an evaluation budget.
    Approx {
        #[arg(long, num_args = 1..)]
        plans: Vec<PathBuf>,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "active")]
        strategy: String,
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replay measurements from this results file.
        #[arg(long, conflicts_with = "models")]
        db: Option<PathBuf>,
        /// Evaluate these models live instead of replaying.
        #[arg(long = "model")]
        models: Vec<String>,
        /// Instances per task for live evaluation.
        #[arg(long, default_value_t = 15)]
        n: u32,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mine closed frequent patterns over plans.
    Mine {
        #[arg(long, num_args = 1..)]
        plans: Vec<PathBuf>,
        #[arg(long)]
        generator: Option<String>,
        /// Plan filter JSON (a list of clauses).
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        support: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score how surprising each task result is given similar tasks.
    Surprise {
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        plans: Vec<PathBuf>,
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write hashed plan embeddings as JSON lines.
    Embed {
        #[arg(long, num_args = 1..)]
        plans: Vec<PathBuf>,
        #[arg(long, default_value_t = taskgen_core::approx::DEFAULT_DIM)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        plans: Vec<PathBuf>,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        cors_origin: Option<String>,
        /// Approximation jobs run at most this many at a time.
        #[arg(long, default_value_t = 2)]
        workers: usize,
    },
    /// Run a simulated model over the wire protocol (stdio unless --port).
    SimModel {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value = "sim")]
        id: String,
        #[arg(long, default_value_t = 0)]
        salt: u64,
        #[arg(long, num_args = 1..)]
        plans: Vec<PathBuf>,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        port: Option<u16>,
    },
}

/// Mistakes in how the command was invoked; they exit with status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

struct Env {
    root: Option<PathBuf>,
}

impl Env {
    fn source(&self, a: &SourceArgs) -> SourcePaths {
        SourcePaths {
            root: self.root.clone(),
            taxonomy: a.taxonomy.clone(),
            catalog: a.catalog.clone(),
            corpus: a.corpus.clone(),
        }
    }

    fn plans(&self, given: &[PathBuf]) -> Result<Vec<PathBuf>> {
        if !given.is_empty() {
            return Ok(given.to_vec());
        }
        match &self.root {
            Some(r) => Ok(vec![r.join("plans")]),
            None => Err(usage(format!("--plans is required when {DATA_DIR_ENV} is not set"))),
        }
    }

    fn db(&self, given: &Option<PathBuf>) -> Result<PathBuf> {
        match (given, &self.root) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(r)) => Ok(r.join("results.jsonl")),
            (None, None) => Err(usage(format!("--db is required when {DATA_DIR_ENV} is not set"))),
        }
    }
}

/// Writes pretty JSON to `out` atomically, or to stdout.
fn emit(out: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => write_atomic(p, text.as_bytes()).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_query(path: &Path) -> Result<Query> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading query {}", path.display()))?;
    let q: Query = serde_json::from_str(&text).with_context(|| format!("parsing query {}", path.display()))?;
    q.validate()?;
    Ok(q)
}

fn load_models(specs: &[String]) -> Result<Vec<Arc<dyn ModelAdapter>>> {
    let mut out: Vec<Arc<dyn ModelAdapter>> = Vec::new();
    for s in specs {
        let m = parse_model(s).map_err(|e| match e {
            taskgen_server::models::ModelSpecError::Syntax { .. } => usage(e.to_string()),
            other => other.into(),
        })?;
        if out.iter().any(|o| o.id() == m.id()) {
            return Err(usage(format!("model id `{}` given twice", m.id())));
        }
        out.push(m);
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let env = Env { root: cli.data_dir };
    match cli.cmd {
        Cmd::Generators => {
            for g in data::registry().list() {
                println!("{g}");
            }
            Ok(())
        }
        Cmd::Enumerate { generator, source, out } => {
            let registry = data::registry();
            registry.get(&generator).map_err(|e| usage(e.to_string()))?;
            let src = env.source(&source).load()?;
            let table = enumerate_plans(&registry, &generator, &src)?;
            save_table(&table, &out)?;
            eprintln!("{} plans -> {}", table.rows().len(), out.display());
            Ok(())
        }
        Cmd::Generate {
            plans,
            source,
            instances,
            seed,
            out,
        } => generate(&env, &plans, &source, instances, seed, &out),
        Cmd::Eval {
            plans,
            source,
            models,
            db,
            n,
            style,
            seed,
            max_parallel,
            asset_dir,
        } => {
            let style = PromptStyle::parse(&style).ok_or_else(|| usage(format!("unknown prompt style `{style}`")))?;
            let models = load_models(&models)?;
            let plans = data::load_plans(&env.plans(&plans)?)?;
            let src = env.source(&source).load()?;
            let registry = data::registry();
            let db_path = env.db(&db)?;
            let mut db = ResultsDb::open(&db_path)?;
            let cfg = EvalConfig {
                n,
                style,
                master_seed: seed,
                max_parallel,
                asset_dir,
            };
            let ctx = EvalContext {
                registry: &registry,
                source: &src,
            };
            let mut shown = usize::MAX;
            let report = run_evaluation(&models, &plans, ctx, &cfg, &mut db, |done, total| {
                let tenth = done * 10 / total.max(1);
                if tenth != shown {
                    shown = tenth;
                    eprintln!("evaluated {done}/{total} pairs");
                }
            })?;
            emit(None, &report)?;
            if !report.failed.is_empty() {
                bail!("{} (model, plan) pairs failed", report.failed.len());
            }
            Ok(())
        }
        Cmd::Query {
            db,
            plans,
            source,
            spec,
            out,
        } => {
            let q = read_query(&spec)?;
            let db = data::open_existing_db(&env.db(&db)?)?;
            let plans = data::load_plans(&env.plans(&plans)?)?;
            let src = env.source(&source).load()?;
            let r = execute(&q, &plans, &AccuracyTable::from_db(&db), Some(&src.taxonomy))?;
            emit(out.as_deref(), &r)
        }
        Cmd::Approx {
            plans,
            source,
            spec,
            strategy,
            budget,
            batch,
            seed,
            db,
            models,
            n,
            embeddings,
            out,
        } => {
            let strategy = Strategy::parse(&strategy).ok_or_else(|| usage(format!("unknown strategy `{strategy}`")))?;
            let q = read_query(&spec)?;
            let plans = data::load_plans(&env.plans(&plans)?)?;
            let src = env.source(&source).load()?;
            let scope = q.scope.select(&plans, Some(&src.taxonomy))?;
            let embedder = data::embedder(embeddings.as_deref())?;
            let opts = ApproxOptions {
                strategy,
                budget: Budget { total: budget, batch },
                seed,
                gp: GpParams::default(),
            };
            let r = if models.is_empty() {
                let db = data::open_existing_db(&env.db(&db)?)?;
                let table = AccuracyTable::from_db(&db);
                approximate(&q, &scope, embedder.as_ref(), &mut TableEvaluator(&table), opts)?
            } else {
                let adapters = load_models(&models)?;
                let registry = data::registry();
                let mut scratch = ResultsDb::in_memory();
                let mut ev = PipelineEvaluator {
                    adapters: adapters.into_iter().map(|a| (a.id().to_string(), a)).collect(),
                    ctx: EvalContext {
                        registry: &registry,
                        source: &src,
                    },
                    cfg: EvalConfig {
                        n,
                        ..EvalConfig::default()
                    },
                    db: &mut scratch,
                };
                approximate(&q, &scope, embedder.as_ref(), &mut ev, opts)?
            };
            emit(out.as_deref(), &r)
        }
        Cmd::Mine {
            plans,
            generator,
            filter,
            support,
            out,
        } => {
            let filter: PlanFilter = match filter {
                Some(f) => serde_json::from_str(&f).map_err(|e| usage(format!("bad --filter: {e}")))?,
                None => PlanFilter::all(),
            };
            let plans = data::load_plans(&env.plans(&plans)?)?;
            let scope = Scope {
                generators: generator.into_iter().collect(),
                filter,
            };
            let selected = scope.select(&plans, None)?;
            let patterns = mine_patterns(&selected, support)?;
            emit(out.as_deref(), &patterns)
        }
        Cmd::Surprise {
            db,
            plans,
            model,
            k,
            limit,
            embeddings,
            out,
        } => {
            let db = data::open_existing_db(&env.db(&db)?)?;
            let plans = data::load_plans(&env.plans(&plans)?)?;
            let table = AccuracyTable::from_db(&db);
            let values: BTreeMap<_, _> = plans
                .iter()
                .filter_map(|p| table.get(&model, p.id).map(|a| (p.id, a)))
                .collect();
            if values.is_empty() {
                bail!("no results for model `{model}`");
            }
            let evaluated: Vec<&TaskPlan> = plans.iter().filter(|p| values.contains_key(&p.id)).collect();
            let embedder = data::embedder(embeddings.as_deref())?;
            let emb = embed_all(embedder.as_ref(), &evaluated)?;
            let mut scores = surprisingness(&model, &values, &emb, k)?;
            if let Some(l) = limit {
                scores.truncate(l);
            }
            emit(out.as_deref(), &scores)
        }
        Cmd::Embed { plans, dim, out } => {
            let plans = data::load_plans(&env.plans(&plans)?)?;
            let refs: Vec<&TaskPlan> = plans.iter().collect();
            let emb = embed_all(&HashedEmbedder::new(dim).map_err(|e| usage(e.to_string()))?, &refs)?;
            write_atomic(&out, to_jsonl(&emb).as_bytes()).with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
        Cmd::Serve {
            host,
            port,
            db,
            plans,
            source,
            embeddings,
            cors_origin,
            workers,
        } => {
            let cfg = ServeConfig {
                source: env.source(&source),
                plans: env.plans(&plans)?,
                db: Some(env.db(&db)?),
                embeddings,
            };
            let snap = cfg.load()?;
            let cors = api::cors(cors_origin.as_deref()).map_err(usage)?;
            let app = api::router(AppState::new(snap, Some(cfg), workers), cors);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .with_context(|| format!("binding {host}:{port}"))?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                Ok(())
            })
        }
        Cmd::SimModel {
            profile,
            id,
            salt,
            plans,
            source,
            port,
        } => {
            let profile = SkillProfile::load(&profile)?;
            let adapter = SimAdapter::new(id, profile, salt)?;
            let plans = data::load_plans(&env.plans(&plans)?)?;
            let src = env.source(&source).load()?;
            let svc = SimService::new(data::registry(), src, plans, adapter);
            match port {
                None => {
                    let stdin = std::io::stdin();
                    wire::serve_stdio(&svc, BufReader::new(stdin.lock()), std::io::stdout().lock())?;
                    Ok(())
                }
                Some(port) => {
                    let app = wire::router(Arc::new(svc));
                    let rt = tokio::runtime::Runtime::new()?;
                    rt.block_on(async move {
                        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
                        eprintln!("listening on http://{}", listener.local_addr()?);
                        axum::serve(listener, app).await?;
                        Ok(())
                    })
                }
            }
        }
    }
}

fn generate(env: &Env, plans: &[PathBuf], source: &SourceArgs, instances: u32, seed: u64, out: &Path) -> Result<()> {
    if instances == 0 {
        return Err(usage("--instances must be at least 1"));
    }
    let plans = data::load_plans(&env.plans(plans)?)?;
    let src = env.source(source).load()?;
    let registry = data::registry();
    let images = out.join("images");
    std::fs::create_dir_all(&images).with_context(|| format!("creating {}", images.display()))?;
    let mut manifest = String::new();
    for plan in &plans {
        for i in 0..instances {
            let s = instance_seed(seed, plan.id, i);
            let inst = registry
                .generate(plan, &src, s)
                .with_context(|| format!("plan {}", plan.id))?;
            let image_path = match &inst.visual {
                Visual::Png(bytes) => {
                    let rel = format!("images/{}.png", inst.instance_id);
                    let p = out.join(&rel);
                    write_atomic(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
                    rel
                }
                Visual::Image(p) | Visual::Video(p) => p.clone(),
                Visual::Unrendered => bail!("plan {}: generator returned no visual", plan.id),
            };
            let rec = ManifestRecord {
                instance_id: inst.instance_id,
                plan_id: inst.plan_id,
                seed: s,
                image_path,
                question: inst.question,
                options: inst.options,
                answer_index: inst.answer_index,
            };
            manifest.push_str(&serde_json::to_string(&rec)?);
            manifest.push('\n');
        }
    }
    let m = out.join("manifest.jsonl");
    write_atomic(&m, manifest.as_bytes()).with_context(|| format!("writing {}", m.display()))?;
    eprintln!("{} instances -> {}", plans.len() * instances as usize, out.display());
    Ok(())
}
