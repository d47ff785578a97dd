//! Brute-force plan enumeration for every built-in generator, written as
//! nested loops over the source data, compared with `enumerate_plans`.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use taskgen_core::planspace::{enumerate_plans, FieldValue, GeneratorRegistry, PlanId, SourceData, TaskPlan};
use taskgen_core::sggen::{distinguishing_pattern_with, PatternOptions, SceneGraph, SceneGraphCorpus};
use taskgen_core::taxonomy::{AttributeType, ObjectCatalog};
use taskgen_core::testkit::MiniWorld;
use taskgen_core::util::{rng_from, stable_hash64};

use crate::common::{ensure, frames_inside, isolated, pattern_matches, relation_span, window, Check, Closure};

type Values = Vec<(&'static str, FieldValue)>;

const DIRECTIONS: [&str; 8] = [
    "left",
    "right",
    "top",
    "bottom",
    "top left",
    "top right",
    "bottom left",
    "bottom right",
];

pub const GENERATORS: [&str; 11] = [
    "2d-how-many",
    "2d-what",
    "2d-where",
    "2d-what-attribute",
    "2d-where-attribute",
    "sg-what-object",
    "sg-what-attribute",
    "sg-what-relation",
    "video-what-object",
    "video-what-relation",
    "video-what-action",
];

fn text(s: &str) -> FieldValue {
    FieldValue::text(s)
}

fn opt_text(s: Option<&str>) -> FieldValue {
    s.map_or(FieldValue::Null, text)
}

fn list(items: &BTreeSet<String>) -> FieldValue {
    FieldValue::List(items.iter().cloned().collect())
}

fn grid_rows(generator: &str, catalog: &ObjectCatalog, tax: &Closure) -> Vec<Values> {
    let objs = catalog.objects();
    let cats: BTreeSet<&str> = objs.iter().map(|o| o.category.as_str()).collect();
    let mut avs: BTreeSet<(AttributeType, &str)> = BTreeSet::new();
    for o in objs {
        for (t, vs) in &o.attributes {
            for v in vs {
                avs.insert((*t, v));
            }
        }
    }
    let mut rows = Vec::new();
    for n in [2i64, 3] {
        match generator {
            "2d-how-many" => {
                let mut groups: Vec<(&str, Option<&str>, Option<(AttributeType, &str)>)> = Vec::new();
                groups.extend(cats.iter().map(|c| ("category", Some(*c), None)));
                groups.extend(avs.iter().map(|av| ("attribute", None, Some(*av))));
                for c in &cats {
                    groups.extend(avs.iter().map(|av| ("category-attribute", Some(*c), Some(*av))));
                }
                for (part, c, av) in groups {
                    let avail = objs
                        .iter()
                        .filter(|o| c.is_none_or(|c| o.category == c))
                        .filter(|o| av.is_none_or(|(t, v)| o.has_value(t, v)))
                        .count() as i64;
                    for count in 1..=avail.min(n * n) {
                        rows.push(vec![
                            ("partition", text(part)),
                            ("grid_number", n.into()),
                            ("category", opt_text(c)),
                            ("attribute_type", opt_text(av.map(|(t, _)| t.as_str()))),
                            ("attribute_value", opt_text(av.map(|(_, v)| v))),
                            ("count", count.into()),
                        ]);
                    }
                }
            }
            "2d-what" | "2d-where" => {
                for c in &cats {
                    for cell in 0..n * n {
                        rows.push(vec![
                            ("partition", text("absolute")),
                            ("grid_number", n.into()),
                            ("category", text(c)),
                            ("cell", cell.into()),
                            ("reference_category", FieldValue::Null),
                            ("direction", FieldValue::Null),
                        ]);
                    }
                    for r in cats.iter().filter(|r| !tax.related(c, r)) {
                        for d in DIRECTIONS {
                            rows.push(vec![
                                ("partition", text("relative")),
                                ("grid_number", n.into()),
                                ("category", text(c)),
                                ("cell", FieldValue::Null),
                                ("reference_category", text(r)),
                                ("direction", text(d)),
                            ]);
                        }
                    }
                }
            }
            _ => {
                let locate = generator == "2d-where-attribute";
                for (t, v) in &avs {
                    for cell in 0..n * n {
                        rows.push(vec![
                            ("partition", text("absolute")),
                            ("grid_number", n.into()),
                            ("attribute_type", text(t.as_str())),
                            ("attribute_value", text(v)),
                            ("cell", cell.into()),
                            ("reference_category", FieldValue::Null),
                            ("direction", FieldValue::Null),
                        ]);
                    }
                    for r in &cats {
                        let target = objs.iter().any(|o| o.has_value(*t, v) && !tax.related(&o.category, r));
                        let reference = objs
                            .iter()
                            .any(|o| o.category == *r && !(locate && o.has_value(*t, v)));
                        if !(target && reference) {
                            continue;
                        }
                        for d in DIRECTIONS {
                            rows.push(vec![
                                ("partition", text("relative")),
                                ("grid_number", n.into()),
                                ("attribute_type", text(t.as_str())),
                                ("attribute_value", text(v)),
                                ("cell", FieldValue::Null),
                                ("reference_category", text(r)),
                                ("direction", text(d)),
                            ]);
                        }
                    }
                }
            }
        }
    }
    rows
}

struct Pools {
    categories: BTreeSet<String>,
    actions: BTreeSet<String>,
}

impl Pools {
    fn new(corpus: &SceneGraphCorpus) -> Self {
        let gs = corpus.graphs();
        Self {
            categories: gs.iter().flat_map(|g| g.objects.iter().map(|o| o.category.clone())).collect(),
            actions: gs.iter().flat_map(|g| g.actions.iter().map(|a| a.label.clone())).collect(),
        }
    }

    fn values(corpus: &SceneGraphCorpus, kind: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for g in corpus.graphs() {
            for o in &g.objects {
                out.extend(o.attributes.iter().filter(|a| a.kind == kind).map(|a| a.value.clone()));
            }
        }
        out
    }

    fn predicates(corpus: &SceneGraphCorpus, family: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for g in corpus.graphs() {
            out.extend(
                g.relations
                    .iter()
                    .filter(|r| r.family.as_deref().unwrap_or("relation") == family)
                    .map(|r| r.predicate.clone()),
            );
        }
        out
    }
}

/// Reference pattern for `node`, seeded by (purpose, graph, node), after
/// checking that it names `node` alone.
fn reference(
    g: &SceneGraph,
    node: &str,
    purpose: &str,
    opts: &PatternOptions,
) -> Result<Option<String>, String> {
    let key = format!("{purpose}\u{0}{}\u{0}{node}", g.graph_id);
    let mut rng = rng_from(&[stable_hash64(key.as_bytes())]);
    let Some(p) = distinguishing_pattern_with(g, node, &mut rng, opts) else {
        return Ok(None);
    };
    let json = p.to_json();
    let hits = pattern_matches(g, &serde_json::from_str(&json).expect("pattern JSON"));
    ensure(hits == [node], || format!("{}: pattern {json} for `{node}` matches {hits:?}", g.graph_id))?;
    Ok(Some(json))
}

fn image_rows(kind: &str, corpus: &SceneGraphCorpus, tax: &Closure) -> Result<Vec<Values>, String> {
    let pools = Pools::new(corpus);
    let none = BTreeSet::new();
    let mut rows = Vec::new();
    for g in corpus.graphs().iter().filter(|g| g.num_frames.is_none()) {
        let gid = || text(&g.graph_id);
        match kind {
            "sg-what-object" => {
                for o in &g.objects {
                    let opts = PatternOptions {
                        omit_category: true,
                        ..Default::default()
                    };
                    let Some(p) = reference(g, &o.id, "object", &opts)? else {
                        continue;
                    };
                    if isolated(tax, &pools.categories, &o.category, &none) < 3 {
                        continue;
                    }
                    rows.push(vec![
                        ("graph_id", gid()),
                        ("object", text(&o.id)),
                        ("subgraph", text(&p)),
                        ("answers", list(&none)),
                    ]);
                }
            }
            "sg-what-attribute" => {
                for o in &g.objects {
                    let pairs: BTreeSet<(&str, &str)> =
                        o.attributes.iter().map(|a| (a.kind.as_str(), a.value.as_str())).collect();
                    for (k, v) in pairs {
                        let opts = PatternOptions {
                            omit_attribute_kind: Some(k.to_string()),
                            ..Default::default()
                        };
                        let Some(p) = reference(g, &o.id, &format!("attribute:{k}"), &opts)? else {
                            continue;
                        };
                        let others: BTreeSet<String> = o
                            .attributes
                            .iter()
                            .filter(|a| a.kind == k && a.value != v)
                            .map(|a| a.value.clone())
                            .collect();
                        if isolated(tax, &Pools::values(corpus, k), v, &others) < 3 {
                            continue;
                        }
                        rows.push(vec![
                            ("graph_id", gid()),
                            ("object", text(&o.id)),
                            ("attribute_type", text(k)),
                            ("attribute", text(v)),
                            ("subgraph", text(&p)),
                            ("answers", list(&others)),
                        ]);
                    }
                }
            }
            _ => {
                let edges: BTreeSet<(&str, &str, &str, &str)> = g
                    .relations
                    .iter()
                    .filter(|e| e.source != e.target)
                    .map(|e| {
                        let family = e.family.as_deref().unwrap_or("relation");
                        (e.source.as_str(), e.target.as_str(), e.predicate.as_str(), family)
                    })
                    .collect();
                for &(s, t, pred, family) in &edges {
                    let avoid = |n: &str| PatternOptions {
                        avoid_nodes: vec![n.to_string()],
                        ..Default::default()
                    };
                    let ps = reference(g, s, &format!("source:{t}"), &avoid(t))?;
                    let pt = reference(g, t, &format!("target:{s}"), &avoid(s))?;
                    let (Some(ps), Some(pt)) = (ps, pt) else {
                        continue;
                    };
                    let others: BTreeSet<String> = g
                        .relations
                        .iter()
                        .filter(|e| e.source == s && e.target == t && e.predicate != pred)
                        .map(|e| e.predicate.clone())
                        .collect();
                    if isolated(tax, &Pools::predicates(corpus, family), pred, &others) < 3 {
                        continue;
                    }
                    rows.push(vec![
                        ("graph_id", gid()),
                        ("source", text(s)),
                        ("target", text(t)),
                        ("relation", text(pred)),
                        ("source_subgraph", text(&ps)),
                        ("target_subgraph", text(&pt)),
                        ("answers", list(&others)),
                    ]);
                }
            }
        }
    }
    Ok(rows)
}

fn video_rows(kind: &str, corpus: &SceneGraphCorpus, tax: &Closure) -> Vec<Values> {
    let pools = Pools::new(corpus);
    let mut rows = Vec::new();
    for g in corpus.graphs().iter().filter(|g| g.num_frames.is_some()) {
        let people: Vec<&str> = g
            .objects
            .iter()
            .filter(|o| o.category == "person")
            .map(|o| o.id.as_str())
            .collect();
        let [person] = people.as_slice() else {
            continue;
        };
        let labels: BTreeSet<&str> = g.actions.iter().map(|a| a.label.as_str()).collect();
        for anchor in labels {
            for temporal in ["before", "while", "after"] {
                let Some(w) = window(g, anchor, temporal) else {
                    continue;
                };
                let mut base = vec![("graph_id", text(&g.graph_id))];
                if kind == "video-what-action" {
                    let len = w.1 - w.0 + 1;
                    let mut strong = BTreeSet::new();
                    let mut touching = BTreeSet::new();
                    for a in g.actions.iter().filter(|a| a.label != anchor) {
                        let ov = frames_inside((a.start, a.end), w);
                        if 2 * ov >= len {
                            strong.insert(a.label.clone());
                        }
                        if ov > 0 {
                            touching.insert(a.label.clone());
                        }
                    }
                    if strong.len() != 1 {
                        continue;
                    }
                    let truth = strong.into_iter().next().expect("one label");
                    touching.remove(&truth);
                    touching.insert(anchor.to_string());
                    if isolated(tax, &pools.actions, &truth, &touching) < 3 {
                        continue;
                    }
                    base.extend([
                        ("action", text(&truth)),
                        ("reference_action", text(anchor)),
                        ("temporal", text(temporal)),
                        ("answers", list(&touching)),
                    ]);
                    rows.push(base);
                    continue;
                }
                let mine: Vec<_> = g
                    .relations
                    .iter()
                    .filter(|e| e.source == *person && e.target != *person)
                    .collect();
                for e in &mine {
                    let span = relation_span(g, e.frames);
                    if frames_inside(span, w) != w.1 - w.0 + 1 {
                        continue;
                    }
                    let family = e.family.as_deref().unwrap_or("relation");
                    let during = |x: &&&taskgen_core::sggen::SgRelation| frames_inside(relation_span(g, x.frames), w) > 0;
                    let obj = g.objects.iter().find(|o| o.id == e.target).expect("edge endpoint");
                    let (truth, others, pool) = if kind == "video-what-relation" {
                        if g.objects.iter().filter(|o| o.category == obj.category).count() != 1 {
                            continue;
                        }
                        let others: BTreeSet<String> = mine
                            .iter()
                            .filter(|x| x.target == e.target && x.predicate != e.predicate)
                            .filter(|x| x.family.as_deref().unwrap_or("relation") == family)
                            .filter(during)
                            .map(|x| x.predicate.clone())
                            .collect();
                        (e.predicate.clone(), others, Pools::predicates(corpus, family))
                    } else {
                        let others: BTreeSet<String> = mine
                            .iter()
                            .filter(|x| x.target != e.target && x.predicate == e.predicate)
                            .filter(during)
                            .map(|x| g.objects.iter().find(|o| o.id == x.target).expect("edge endpoint").category.clone())
                            .filter(|c| *c != obj.category)
                            .collect();
                        let mut pool = pools.categories.clone();
                        pool.remove("person");
                        (obj.category.clone(), others, pool)
                    };
                    if isolated(tax, &pool, &truth, &others) < 3 {
                        continue;
                    }
                    let mut row = base.clone();
                    row.extend([
                        ("object", text(&e.target)),
                        ("relation", text(&e.predicate)),
                        ("reference_type", text(family)),
                        ("reference_action", text(anchor)),
                        ("temporal", text(temporal)),
                        ("answers", list(&others)),
                    ]);
                    rows.push(row);
                }
            }
        }
    }
    rows
}

/// Oracle plans for one generator, keyed by plan id.
pub fn oracle(
    registry: &GeneratorRegistry,
    generator: &str,
    source: &SourceData,
) -> Result<BTreeMap<PlanId, TaskPlan>, String> {
    let tax = Closure::new(&source.taxonomy);
    let rows = if generator.starts_with("2d-") {
        grid_rows(generator, source.catalog().map_err(|e| e.to_string())?, &tax)
    } else {
        let corpus = source.corpus().map_err(|e| e.to_string())?;
        if generator.starts_with("sg-") {
            image_rows(generator, corpus, &tax)?
        } else {
            video_rows(generator, corpus, &tax)
        }
    };
    let schema = registry.get(generator).map_err(|e| e.to_string())?.schema().clone();
    rows.into_iter()
        .map(|r| {
            let p = TaskPlan::new(&schema, r).map_err(|e| format!("{generator}: {e}"))?;
            Ok((p.id, p))
        })
        .collect()
}

pub fn enumeration_oracle() -> Check {
    let start = Instant::now();
    let world = MiniWorld::new();
    let source = world.source();
    let registry = GeneratorRegistry::builtin();
    let mut counts = Vec::new();
    for g in GENERATORS {
        let got: BTreeMap<PlanId, TaskPlan> = enumerate_plans(&registry, g, &source)
            .map_err(|e| format!("{g}: {e}"))?
            .into_rows()
            .into_iter()
            .map(|p| (p.id, p))
            .collect();
        let want = oracle(&registry, g, &source)?;
        let extra: Vec<_> = got.keys().filter(|k| !want.contains_key(k)).collect();
        let missing: Vec<_> = want.values().filter(|p| !got.contains_key(&p.id)).collect();
        ensure(extra.is_empty() && missing.is_empty(), || {
            format!(
                "{g}: {} unexpected, {} missing; first missing {:?}",
                extra.len(),
                missing.len(),
                missing.first().map(|p| p.atoms())
            )
        })?;
        ensure(got == want, || format!("{g}: same ids but different field values"))?;
        counts.push(format!("{g}={}", got.len()));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{} ({secs:.2}s)", counts.join(" ")))
}
