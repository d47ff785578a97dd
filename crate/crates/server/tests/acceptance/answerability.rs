//! Solvers that read the layout (grids) or the graph (scene graphs) and
//! decide which options are correct, without looking at the answer index.

use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use taskgen_core::gridgen::{GridConfig, GridGenerator, GridKind, GridLayout};
use taskgen_core::instance::QuestionSpec;
use taskgen_core::planspace::{GeneratorRegistry, TaskPlan};
use taskgen_core::sggen::SceneGraph;
use taskgen_core::taxonomy::{AttributeType, ObjectCatalog, ObjectRecord};
use taskgen_core::testkit::MiniWorld;

use crate::common::{ensure, frames_inside, pattern_matches, plans_of, relation_span, window, Check, Closure};

const GRID_INSTANCES: usize = 10_000;
const SG_INSTANCES: usize = 2_000;

fn position_name(cell: usize, n: usize) -> String {
    let (r, c) = (cell / n, cell % n);
    let row = match (n, r) {
        (_, 0) => "top",
        (3, 1) => "middle",
        _ => "bottom",
    };
    let col = match (n, c) {
        (_, 0) => "left",
        (3, 1) => "middle",
        _ => "right",
    };
    match (row, col) {
        ("middle", "middle") => "middle".into(),
        _ => format!("{row} {col}"),
    }
}

/// Name of the direction from `from` to `to`.
fn direction(to: usize, from: usize, n: usize) -> String {
    let (dr, dc) = ((to / n) as i64 - (from / n) as i64, (to % n) as i64 - (from % n) as i64);
    let v = match dr.signum() {
        -1 => "top",
        1 => "bottom",
        _ => "",
    };
    let h = match dc.signum() {
        -1 => "left",
        1 => "right",
        _ => "",
    };
    format!("{v} {h}").trim().to_string()
}

struct Grid<'a> {
    n: usize,
    placed: Vec<(usize, &'a ObjectRecord)>,
}

impl<'a> Grid<'a> {
    fn read(layout: &GridLayout, catalog: &'a ObjectCatalog) -> Result<Self, String> {
        let mut placed = Vec::new();
        for (cell, slot) in layout.cells.iter().enumerate() {
            if let Some(p) = slot {
                let obj = catalog.get(&p.object_id).ok_or_else(|| format!("unknown object {}", p.object_id))?;
                placed.push((cell, obj));
            }
        }
        Ok(Self { n: layout.n, placed })
    }

    fn at(&self, cell: usize) -> Option<&'a ObjectRecord> {
        self.placed.iter().find(|(c, _)| *c == cell).map(|(_, o)| *o)
    }

    /// The single cell whose object satisfies `keep`.
    fn unique(&self, what: &str, keep: impl Fn(&ObjectRecord) -> bool) -> Result<usize, String> {
        let hits: Vec<usize> = self.placed.iter().filter(|(_, o)| keep(o)).map(|(c, _)| *c).collect();
        match hits.as_slice() {
            [c] => Ok(*c),
            _ => Err(format!("{} objects match {what}", hits.len())),
        }
    }

    /// The single occupied cell lying in `dir` from `from`.
    fn toward(&self, from: usize, dir: &str) -> Result<usize, String> {
        let hits: Vec<usize> = self
            .placed
            .iter()
            .map(|(c, _)| *c)
            .filter(|&c| c != from && direction(c, from, self.n) == dir)
            .collect();
        match hits.as_slice() {
            [c] => Ok(*c),
            _ => Err(format!("{} objects lie {dir} of cell {from}", hits.len())),
        }
    }
}

fn category_and_ancestors(tax: &Closure, c: &str) -> BTreeSet<String> {
    let mut s = tax.ancestors(c);
    s.insert(c.to_string());
    s
}

/// Correct answers for a grid question, read off the layout.
fn grid_truths(plan: &TaskPlan, grid: &Grid, tax: &Closure) -> Result<BTreeSet<String>, String> {
    let text = |f: &str| plan.text(f).map(str::to_string);
    let cat = text("category");
    let attr = text("attribute_type").map(|t| (AttributeType::parse(&t).expect("known attribute type"), text("attribute_value").unwrap()));
    let relative = plan.text("partition") == Some("relative");
    let reference = || -> Result<usize, String> {
        let r = text("reference_category").unwrap();
        grid.unique(&format!("reference {r}"), |o| tax.is_a(&o.category, &r))
    };
    let dir = || text("direction").unwrap();
    let cell = || plan.int("cell").unwrap() as usize;
    let has_attr = |o: &ObjectRecord| attr.as_ref().is_some_and(|(t, v)| o.has_value(*t, v));
    let one = |s: String| BTreeSet::from([s]);
    Ok(match plan.generator.as_str() {
        "2d-how-many" => {
            let counted = |o: &&ObjectRecord| {
                cat.as_ref().is_none_or(|c| tax.is_a(&o.category, c)) && attr.as_ref().is_none_or(|(t, v)| o.has_value(*t, v))
            };
            // anything that could be counted under a looser reading must be absent
            let loose = |o: &&ObjectRecord| {
                cat.as_ref().is_none_or(|c| tax.related(&o.category, c)) && attr.as_ref().is_none_or(|(t, v)| o.has_value(*t, v))
            };
            let strict = grid.placed.iter().map(|(_, o)| *o).filter(counted).count();
            let wide = grid.placed.iter().map(|(_, o)| *o).filter(loose).count();
            ensure(strict == wide, || format!("count is ambiguous: {strict} vs {wide}"))?;
            one(strict.to_string())
        }
        "2d-what" | "2d-what-attribute" => {
            let target = if relative { grid.toward(reference()?, &dir())? } else { cell() };
            let obj = grid.at(target).ok_or_else(|| format!("cell {target} is empty"))?;
            match &attr {
                None => category_and_ancestors(tax, &obj.category),
                Some((t, _)) => obj.values(*t).iter().cloned().collect(),
            }
        }
        "2d-where" | "2d-where-attribute" => {
            let target = match (&cat, &attr) {
                (Some(c), _) => grid.unique(c, |o| tax.is_a(&o.category, c))?,
                (None, Some((_, v))) => grid.unique(v, has_attr)?,
                _ => return Err("plan names no target".into()),
            };
            if relative {
                one(direction(target, reference()?, grid.n))
            } else {
                one(position_name(target, grid.n))
            }
        }
        g => return Err(format!("unexpected generator {g}")),
    })
}

/// The marked option must be the only option in `truths`.
fn check_options(q: &QuestionSpec, truths: &BTreeSet<String>) -> Result<(), String> {
    let hits: Vec<usize> = (0..q.options.len()).filter(|&i| truths.contains(&q.options[i])).collect();
    ensure(hits == [q.answer_index], || {
        format!("`{}` options {:?} marked {} but correct are {truths:?}", q.question, q.options, q.answer_index)
    })
}

pub fn grid_answerable() -> Check {
    let world = MiniWorld::new();
    let source = world.source();
    let registry = GeneratorRegistry::builtin();
    let catalog = source.catalog().map_err(|e| e.to_string())?;
    let tax = Closure::new(&source.taxonomy);
    let mut rng = StdRng::seed_from_u64(0xa115);
    let mut per_kind = Vec::new();
    for kind in GridKind::ALL {
        let generator = GridGenerator::new(kind, GridConfig::default());
        let plans = plans_of(&registry, &source, &[kind.id()]);
        let quota = GRID_INSTANCES / GridKind::ALL.len();
        for _ in 0..quota {
            let plan = &plans[rng.random_range(0..plans.len())];
            let seed: u64 = rng.random();
            let (layout, q) = generator.realize(plan, &source, seed).map_err(|e| format!("{}: {e}", plan.id))?;
            let grid = Grid::read(&layout, catalog)?;
            let truths = grid_truths(plan, &grid, &tax).map_err(|e| format!("{} {:?} seed {seed}: {e}", kind.id(), plan.atoms()))?;
            check_options(&q, &truths).map_err(|e| format!("{} {:?} seed {seed}: {e}", kind.id(), plan.atoms()))?;
        }
        per_kind.push(format!("{}={quota}", kind.id()));
    }
    Ok(format!("0 failures; {}", per_kind.join(" ")))
}

fn sole_person(g: &SceneGraph) -> Result<&str, String> {
    let people: Vec<&str> = g.objects.iter().filter(|o| o.category == "person").map(|o| o.id.as_str()).collect();
    match people.as_slice() {
        [p] => Ok(p),
        _ => Err(format!("{} people in {}", people.len(), g.graph_id)),
    }
}

fn category_of<'g>(g: &'g SceneGraph, id: &str) -> &'g str {
    &g.objects.iter().find(|o| o.id == id).expect("node exists").category
}

/// The one node a serialized pattern picks out.
fn resolve(g: &SceneGraph, plan: &TaskPlan, field: &str) -> Result<String, String> {
    let json: serde_json::Value = serde_json::from_str(plan.text(field).unwrap()).map_err(|e| e.to_string())?;
    match pattern_matches(g, &json).as_slice() {
        [one] => Ok(one.clone()),
        many => Err(format!("{field} matches {many:?}")),
    }
}

/// Correct answers for a scene-graph question, computed from the graph.
fn sg_truths(plan: &TaskPlan, g: &SceneGraph, tax: &Closure) -> Result<BTreeSet<String>, String> {
    let text = |f: &str| plan.text(f).unwrap().to_string();
    match plan.generator.as_str() {
        "sg-what-object" => {
            let node = resolve(g, plan, "subgraph")?;
            ensure(node == text("object"), || format!("pattern resolves to {node}"))?;
            Ok(category_and_ancestors(tax, category_of(g, &node)))
        }
        "sg-what-attribute" => {
            let node = resolve(g, plan, "subgraph")?;
            let kind = text("attribute_type");
            let obj = g.objects.iter().find(|o| o.id == node).expect("node exists");
            Ok(obj.attributes.iter().filter(|a| a.kind == kind).map(|a| a.value.clone()).collect())
        }
        "sg-what-relation" => {
            let s = resolve(g, plan, "source_subgraph")?;
            let t = resolve(g, plan, "target_subgraph")?;
            Ok(g.relations
                .iter()
                .filter(|e| e.source == s && e.target == t)
                .map(|e| e.predicate.clone())
                .collect())
        }
        video => {
            let person = sole_person(g)?;
            let w = window(g, &text("reference_action"), &text("temporal")).ok_or("no window")?;
            let during = |frames| frames_inside(relation_span(g, frames), w) > 0;
            match video {
                "video-what-object" => {
                    let pred = text("relation");
                    let mut out = BTreeSet::new();
                    for e in g.relations.iter().filter(|e| e.source == person && e.predicate == pred && during(e.frames)) {
                        out.extend(category_and_ancestors(tax, category_of(g, &e.target)));
                    }
                    Ok(out)
                }
                "video-what-relation" => {
                    let object = text("object");
                    let cat = category_of(g, &object);
                    ensure(g.objects.iter().filter(|o| o.category == cat).count() == 1, || format!("{cat} is ambiguous"))?;
                    Ok(g.relations
                        .iter()
                        .filter(|e| e.source == person && e.target == object && during(e.frames))
                        .map(|e| e.predicate.clone())
                        .collect())
                }
                _ => {
                    let anchor = text("reference_action");
                    Ok(g.actions
                        .iter()
                        .filter(|a| a.label != anchor && frames_inside((a.start, a.end), w) > 0)
                        .map(|a| a.label.clone())
                        .collect())
                }
            }
        }
    }
}

pub fn scene_graph_answerable() -> Check {
    let world = MiniWorld::new();
    let source = world.source();
    let registry = GeneratorRegistry::builtin();
    let corpus = source.corpus().map_err(|e| e.to_string())?;
    let tax = Closure::new(&source.taxonomy);
    let gens = [
        "sg-what-object",
        "sg-what-attribute",
        "sg-what-relation",
        "video-what-object",
        "video-what-relation",
        "video-what-action",
    ];
    let plans = plans_of(&registry, &source, &gens);
    let mut rng = StdRng::seed_from_u64(0x5c3e);
    for _ in 0..SG_INSTANCES {
        let plan = &plans[rng.random_range(0..plans.len())];
        let seed: u64 = rng.random();
        let inst = registry.generate(plan, &source, seed).map_err(|e| format!("{}: {e}", plan.id))?;
        let g = corpus.get(plan.text("graph_id").unwrap()).ok_or("graph vanished")?;
        let ctx = |e: String| format!("{} {:?} seed {seed}: {e}", plan.generator, plan.atoms());
        let truths = sg_truths(plan, g, &tax).map_err(ctx)?;
        let q = QuestionSpec {
            question: inst.question,
            options: inst.options,
            answer_index: inst.answer_index,
        };
        check_options(&q, &truths).map_err(ctx)?;
    }
    Ok(format!("0 failures over {SG_INSTANCES} instances from {} plans", plans.len()))
}
