//! Brute-force answers for queries, pattern mining and surprisingness over
//! a 200-task by 4-model accuracy table with k/15 accuracies.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use taskgen_core::planspace::{Clause, FieldKind, FieldSpec, FieldValue, PlanFilter, PlanId, PlanSchema, TaskPlan};
use taskgen_core::queryeng::{
    execute, mine_patterns, surprisingness, AccuracyTable, DebugMode, Direction, InnerAgg, ItemKey, ModelStats, Order,
    Pattern, Query, QueryKind, QueryResult, ResultItem, Scope, Target,
};
use taskgen_core::testkit::MiniWorld;

use crate::common::{ensure, Check, Closure};

const MODELS: [&str; 4] = ["m0", "m1", "m2", "m3"];
const CATEGORIES: [&str; 7] = ["apple", "fruit", "cup", "vase", "plate", "table", "chair"];
const COLORS: [&str; 5] = ["red", "blue", "green", "white", "black"];
const MATERIALS: [&str; 3] = ["wood", "metal", "glass"];

struct Toy {
    plans: Vec<TaskPlan>,
    acc: BTreeMap<(String, PlanId), f64>,
    table: AccuracyTable,
    tax: Closure,
    taxonomy: taskgen_core::taxonomy::Taxonomy,
}

fn toy() -> Toy {
    let mut rng = StdRng::seed_from_u64(0x9e7);
    let fields = || {
        vec![
            FieldSpec::new("category", FieldKind::Concept, "categories"),
            FieldSpec::new("color", FieldKind::StringEnum, "colors"),
            FieldSpec::new("size", FieldKind::Integer, "1..6"),
            FieldSpec::new("material", FieldKind::StringEnum, "materials").optional(),
        ]
    };
    let schemas = [
        PlanSchema::new("toy-a", fields()).unwrap(),
        PlanSchema::new("toy-b", fields()).unwrap(),
    ];
    let mut combos = Vec::new();
    for c in CATEGORIES {
        for col in COLORS {
            for size in 1..=6i64 {
                combos.push((c, col, size));
            }
        }
    }
    combos.shuffle(&mut rng);
    let mut plans = Vec::new();
    for (i, (c, col, size)) in combos.into_iter().take(200).enumerate() {
        let material = if rng.random_bool(0.2) {
            FieldValue::Null
        } else {
            FieldValue::text(MATERIALS[rng.random_range(0..3)])
        };
        let values = vec![
            ("category", FieldValue::text(c)),
            ("color", FieldValue::text(col)),
            ("size", FieldValue::Int(size)),
            ("material", material),
        ];
        plans.push(TaskPlan::new(&schemas[i % 2], values).unwrap());
    }
    let mut acc = BTreeMap::new();
    let mut table = AccuracyTable::new();
    for p in &plans {
        for m in MODELS {
            let a = rng.random_range(0..=15u32) as f64 / 15.0;
            acc.insert((m.to_string(), p.id), a);
            table.insert(m, p.id, a);
        }
    }
    let world = MiniWorld::new();
    Toy {
        plans,
        acc,
        table,
        tax: Closure::new(&world.taxonomy),
        taxonomy: world.taxonomy.clone(),
    }
}

fn in_scope(toy: &Toy, scope: &Scope, p: &TaskPlan) -> bool {
    if !scope.generators.is_empty() && !scope.generators.contains(&p.generator) {
        return false;
    }
    scope.filter.clauses.iter().all(|c| match c {
        Clause::Equals { field, value } => p.get(field) == Some(value),
        Clause::InSet { field, values } => p.get(field).is_some_and(|v| values.contains(v)),
        Clause::AncestorOf { field, concept } => p.text(field).is_some_and(|v| toy.tax.is_a(v, concept)),
    })
}

fn key_of(p: &TaskPlan, target: &Target) -> Option<ItemKey> {
    match target {
        Target::Tasks => Some(ItemKey::Task(p.id)),
        Target::Group(fields) => fields
            .iter()
            .map(|f| match p.get(f) {
                None | Some(FieldValue::Null) => None,
                Some(v) => Some((f.clone(), v.to_string())),
            })
            .collect::<Option<Vec<_>>>()
            .map(ItemKey::Group),
    }
}

fn task_stat(toy: &Toy, q: &Query, id: PlanId) -> f64 {
    let a = |m: &str| toy.acc[&(m.to_string(), id)];
    if let QueryKind::Compare { m1, m2, .. } = &q.kind {
        return a(m1) - a(m2);
    }
    let xs: Vec<f64> = q.models.iter().map(|m| a(m)).collect();
    match q.inner_agg {
        InnerAgg::Mean => {
            let mut s = 0.0;
            for x in &xs {
                s += x;
            }
            s / xs.len() as f64
        }
        InnerAgg::Min => xs.iter().copied().fold(f64::INFINITY, f64::min),
        InnerAgg::Max => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Closed itemsets by listing every subset of every transaction.
pub fn brute_mine(tasks: &[&TaskPlan], support: f64) -> Vec<Pattern> {
    let tx: Vec<BTreeSet<String>> = tasks.iter().map(|p| p.atoms().into_iter().collect()).collect();
    let n = tx.len();
    let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
    for t in &tx {
        let atoms: Vec<&String> = t.iter().collect();
        for mask in 1u32..(1 << atoms.len()) {
            let set: Vec<String> = (0..atoms.len()).filter(|b| mask & (1 << b) != 0).map(|b| atoms[b].clone()).collect();
            seen.insert(set);
        }
    }
    let mut out = Vec::new();
    for set in seen {
        let holders: Vec<&BTreeSet<String>> = tx.iter().filter(|t| set.iter().all(|a| t.contains(a))).collect();
        let count = holders.len();
        if (count as f64) < support * n as f64 - 1e-9 {
            continue;
        }
        let common: Vec<String> = holders[0]
            .iter()
            .filter(|a| holders.iter().all(|t| t.contains(*a)))
            .cloned()
            .collect();
        if common == set {
            out.push(Pattern {
                items: set,
                support: count as f64 / n as f64,
                count,
            });
        }
    }
    out.sort_by(|a, b| b.count.cmp(&a.count).then(b.items.len().cmp(&a.items.len())).then(a.items.cmp(&b.items)));
    out
}

/// Expected result, or `None` when the query has no valid answer.
fn oracle(toy: &Toy, q: &Query) -> Option<QueryResult> {
    let scoped: Vec<&TaskPlan> = toy.plans.iter().filter(|p| in_scope(toy, &q.scope, p)).collect();
    let mut groups: BTreeMap<ItemKey, (f64, usize)> = BTreeMap::new();
    for p in &scoped {
        if let Some(k) = key_of(p, &q.target) {
            let e = groups.entry(k).or_insert((0.0, 0));
            e.0 += task_stat(toy, q, p.id);
            e.1 += 1;
        }
    }
    let items: Vec<ResultItem> = groups
        .into_iter()
        .map(|(item, (s, n))| ResultItem {
            item,
            value: s / n as f64,
            tasks: n,
        })
        .collect();
    if items.is_empty() {
        return None;
    }
    let mut stats = None;
    let (kind, selected): (&'static str, Vec<ResultItem>) = match &q.kind {
        QueryKind::TopK { k, order } => {
            let better = |a: &ResultItem, b: &ResultItem| match order {
                Order::Desc => a.value > b.value,
                Order::Asc => a.value < b.value,
            };
            let mut ranked: Vec<(usize, ResultItem)> = items
                .iter()
                .map(|i| {
                    let rank = items
                        .iter()
                        .filter(|j| better(j, i) || (j.value == i.value && j.item < i.item))
                        .count();
                    (rank, i.clone())
                })
                .filter(|(r, _)| r < k)
                .collect();
            ranked.sort_by_key(|(r, _)| *r);
            ("top-k", ranked.into_iter().map(|(_, i)| i).collect())
        }
        QueryKind::Threshold { theta, direction } => (
            "threshold",
            items
                .iter()
                .filter(|i| match direction {
                    Direction::Above => i.value > *theta,
                    Direction::Below => i.value < *theta,
                })
                .cloned()
                .collect(),
        ),
        QueryKind::Compare { margin, .. } => ("compare", items.iter().filter(|i| i.value > *margin).cloned().collect()),
        QueryKind::Debug { k_sigma, mode } => {
            if items.len() < 2 {
                return None;
            }
            let n = items.len() as f64;
            let mut s = 0.0;
            for i in &items {
                s += i.value;
            }
            let mu = s / n;
            let mut v = 0.0;
            for i in &items {
                v += (i.value - mu) * (i.value - mu);
            }
            let sigma = (v / n).sqrt();
            stats = Some(ModelStats { mu, sigma });
            let keep = |x: f64| match mode {
                DebugMode::Worse => x < mu - k_sigma * sigma,
                DebugMode::Better => x > mu + k_sigma * sigma,
            };
            ("debug", items.iter().filter(|i| keep(i.value)).cloned().collect())
        }
    };
    let patterns = q.mine_support.map(|s| {
        let chosen: BTreeSet<&ItemKey> = selected.iter().map(|i| &i.item).collect();
        let tasks: Vec<&TaskPlan> = scoped
            .iter()
            .copied()
            .filter(|p| key_of(p, &q.target).is_some_and(|k| chosen.contains(&k)))
            .collect();
        if tasks.is_empty() {
            Vec::new()
        } else {
            brute_mine(&tasks, s)
        }
    });
    Some(QueryResult {
        kind,
        items: selected,
        stats,
        patterns,
    })
}

fn queries() -> Vec<Query> {
    let kinds = [
        QueryKind::TopK { k: 10, order: Order::Desc },
        QueryKind::TopK { k: 7, order: Order::Asc },
        QueryKind::Threshold {
            theta: 0.5,
            direction: Direction::Above,
        },
        QueryKind::Threshold {
            theta: 0.4,
            direction: Direction::Below,
        },
        QueryKind::Compare {
            m1: "m0".into(),
            m2: "m1".into(),
            margin: 0.1,
        },
        QueryKind::Compare {
            m1: "m3".into(),
            m2: "m2".into(),
            margin: -0.05,
        },
        QueryKind::Debug {
            k_sigma: 1.0,
            mode: DebugMode::Worse,
        },
        QueryKind::Debug {
            k_sigma: 0.5,
            mode: DebugMode::Better,
        },
    ];
    let targets = [
        Target::Tasks,
        Target::Group(vec!["color".into()]),
        Target::Group(vec!["category".into(), "material".into()]),
    ];
    let scopes = [
        Scope::default(),
        Scope {
            generators: vec!["toy-a".into()],
            filter: PlanFilter::all(),
        },
        Scope {
            generators: Vec::new(),
            filter: PlanFilter::all().with(Clause::AncestorOf {
                field: "category".into(),
                concept: "dishware".into(),
            }),
        },
        Scope {
            generators: vec!["toy-b".into()],
            filter: PlanFilter::eq("color", "red"),
        },
    ];
    let model_sets: [&[&str]; 3] = [&MODELS, &["m1"], &["m2", "m0", "m3"]];
    let mut out = Vec::new();
    let mut i = 0;
    for kind in &kinds {
        for target in &targets {
            for scope in &scopes {
                for inner in [InnerAgg::Mean, InnerAgg::Min, InnerAgg::Max] {
                    let mut q = Query::new(kind.clone(), model_sets[(i / 3) % 3]).with_inner(inner);
                    q.target = target.clone();
                    q.scope = scope.clone();
                    q.mine_support = [None, Some(0.2), Some(0.5)][(i / 7) % 3];
                    out.push(q);
                    i += 1;
                }
            }
        }
    }
    out
}

pub fn queries_brute_force() -> Check {
    let start = Instant::now();
    let toy = toy();
    let qs = queries();
    let mut nonempty = 0;
    for (i, q) in qs.iter().enumerate() {
        let got = execute(q, &toy.plans, &toy.table, Some(&toy.taxonomy));
        match (oracle(&toy, q), got) {
            (Some(want), Ok(got)) => {
                ensure(want == got, || format!("query {i} {:?}: got {:?}, want {:?}", q, got.items, want.items))?;
                nonempty += usize::from(!got.items.is_empty());
            }
            (None, Err(_)) => {}
            (want, got) => return Err(format!("query {i} {q:?}: oracle {want:?}, engine {got:?}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!("{} queries exact, {nonempty} with non-empty answers ({secs:.2}s)", qs.len()))
}

pub fn mining_brute_force() -> Check {
    let start = Instant::now();
    let toy = toy();
    let mut rng = StdRng::seed_from_u64(0x313e);
    let mut checked = 0;
    for support in [0.02, 0.05, 0.1, 0.25, 0.5, 1.0] {
        for size in [1, 7, 50, 200] {
            let mut tasks: Vec<&TaskPlan> = toy.plans.iter().collect();
            tasks.shuffle(&mut rng);
            tasks.truncate(size);
            let got = mine_patterns(&tasks, support).map_err(|e| e.to_string())?;
            let want = brute_mine(&tasks, support);
            ensure(got == want, || {
                format!("support {support} size {size}: {} patterns, want {}", got.len(), want.len())
            })?;
            checked += got.len();
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!("24 runs, {checked} closed patterns exact ({secs:.2}s)"))
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let (mut na, mut nb) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0)
}

pub fn surprisingness_brute_force() -> Check {
    let start = Instant::now();
    let toy = toy();
    let mut rng = StdRng::seed_from_u64(0x5a9);
    // small integer vectors so that similarity ties are common
    let emb: BTreeMap<PlanId, Vec<f64>> = toy
        .plans
        .iter()
        .map(|p| (p.id, (0..4).map(|_| rng.random_range(0..3) as f64).collect()))
        .collect();
    let mut runs = 0;
    for model in MODELS {
        let values: BTreeMap<PlanId, f64> = toy.plans.iter().map(|p| (p.id, toy.acc[&(model.to_string(), p.id)])).collect();
        let ids: Vec<PlanId> = values.keys().copied().collect();
        for k in [1, 5, 10] {
            let got = surprisingness(model, &values, &emb, k).map_err(|e| e.to_string())?;
            let mut want: Vec<(PlanId, f64, Vec<(PlanId, f64)>)> = Vec::new();
            for &i in &ids {
                let sims: Vec<(PlanId, f64)> = ids.iter().filter(|&&j| j != i).map(|&j| (j, cos(&emb[&i], &emb[&j]))).collect();
                let mut near: Vec<(usize, PlanId, f64)> = sims
                    .iter()
                    .map(|&(j, s)| (sims.iter().filter(|&&(j2, s2)| s2 > s || (s2 == s && j2 < j)).count(), j, s))
                    .filter(|(r, _, _)| *r < k)
                    .collect();
                near.sort_by_key(|t| t.0);
                let mut s = 0.0;
                for &(_, j, sim) in &near {
                    s += sim * (values[&i] - values[&j]);
                }
                want.push((i, s / k as f64, near.into_iter().map(|(_, j, sim)| (j, sim)).collect()));
            }
            want.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            ensure(got.len() == want.len(), || "length differs".into())?;
            for (g, w) in got.iter().zip(&want) {
                let nb: Vec<(PlanId, f64)> = g.neighbors.iter().map(|n| (n.plan_id, n.sim)).collect();
                ensure(g.plan_id == w.0 && g.s == w.1 && nb == w.2 && g.value == values[&w.0], || {
                    format!("{model} k={k}: got {} s={} for {} s={}", g.plan_id, g.s, w.0, w.1)
                })?;
            }
            runs += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!("{runs} model/k runs over 200 tasks exact ({secs:.2}s)"))
}
