//! Scene-graph generators over annotated images and videos. Image tasks refer
//! to objects through distinguishing subgraph patterns; video tasks anchor a
//! question in time relative to a reference action.

mod graph;
mod pattern;
mod temporal;

pub use graph::{
    load_corpus, CorpusError, SceneGraph, SceneGraphCorpus, SgAction, SgAttribute, SgObject, SgRelation,
    DEFAULT_FAMILY,
};
pub use pattern::{
    distinguishing_pattern, distinguishing_pattern_with, match_subgraph, noun_phrase, which_phrase, EdgeDirection,
    PatternOptions, RelationConstraint, SubgraphPattern, MAX_DEPTH,
};
pub use temporal::{covers, overlap, temporal_window, TemporalError, TemporalReference, TemporalRelation};

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::instance::{GenerationError, QuestionSpec, TaskInstance, Visual};
use crate::planspace::{FieldKind, FieldSpec, FieldValue, PlanId, PlanSchema, SourceData, TaskGenerator, TaskPlan};
use crate::taxonomy::Taxonomy;
use crate::util::{rng_from, stable_hash64};

const DISTRACTORS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SgKind {
    ImageObject,
    ImageAttribute,
    ImageRelation,
    VideoObject,
    VideoRelation,
    VideoAction,
}

impl SgKind {
    pub const ALL: [SgKind; 6] = [
        Self::ImageObject,
        Self::ImageAttribute,
        Self::ImageRelation,
        Self::VideoObject,
        Self::VideoRelation,
        Self::VideoAction,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::ImageObject => "sg-what-object",
            Self::ImageAttribute => "sg-what-attribute",
            Self::ImageRelation => "sg-what-relation",
            Self::VideoObject => "video-what-object",
            Self::VideoRelation => "video-what-relation",
            Self::VideoAction => "video-what-action",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == id)
    }

    pub fn is_video(self) -> bool {
        matches!(self, Self::VideoObject | Self::VideoRelation | Self::VideoAction)
    }

    pub fn schema(self) -> PlanSchema {
        let f = FieldSpec::new;
        let graph = f("graph_id", FieldKind::GraphRef, "corpus graph ids");
        let answers = f("answers", FieldKind::List, "co-answers excluded from options");
        let temporal = [
            f("reference_action", FieldKind::StringEnum, "actions occurring once"),
            f("temporal", FieldKind::StringEnum, "before|while|after"),
        ];
        let fields = match self {
            Self::ImageObject => vec![
                graph,
                f("object", FieldKind::NodeRef, "object nodes"),
                f("subgraph", FieldKind::Text, "pattern JSON"),
                answers,
            ],
            Self::ImageAttribute => vec![
                graph,
                f("object", FieldKind::NodeRef, "object nodes"),
                f("attribute_type", FieldKind::StringEnum, "attribute types"),
                f("attribute", FieldKind::AttributeValue, "attribute values"),
                f("subgraph", FieldKind::Text, "pattern JSON"),
                answers,
            ],
            Self::ImageRelation => vec![
                graph,
                f("source", FieldKind::NodeRef, "object nodes"),
                f("target", FieldKind::NodeRef, "object nodes"),
                f("relation", FieldKind::StringEnum, "predicates"),
                f("source_subgraph", FieldKind::Text, "pattern JSON"),
                f("target_subgraph", FieldKind::Text, "pattern JSON"),
                answers,
            ],
            Self::VideoObject | Self::VideoRelation => {
                let mut v = vec![
                    graph,
                    f("object", FieldKind::NodeRef, "object nodes"),
                    f("relation", FieldKind::StringEnum, "predicates"),
                    f("reference_type", FieldKind::StringEnum, "relation families"),
                ];
                v.extend(temporal);
                v.push(answers);
                v
            }
            Self::VideoAction => {
                let mut v = vec![graph, f("action", FieldKind::StringEnum, "action labels")];
                v.extend(temporal);
                v.push(answers);
                v
            }
        };
        PlanSchema::new(self.id(), fields).expect("static schema has unique fields")
    }
}

/// One derivable question: plan values plus everything needed to build options.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub values: Vec<(&'static str, FieldValue)>,
    pub question: String,
    pub truth: String,
    /// Other correct answers; never offered as distractors.
    pub also_valid: Vec<String>,
    pub pool: Vec<String>,
}

pub struct SgGenerator {
    kind: SgKind,
    schema: PlanSchema,
}

impl SgGenerator {
    pub fn new(kind: SgKind) -> Self {
        Self {
            kind,
            schema: kind.schema(),
        }
    }

    pub fn kind(&self) -> SgKind {
        self.kind
    }

    /// Every valid question of this kind on one graph.
    pub fn candidates(&self, corpus: &SceneGraphCorpus, g: &SceneGraph, tax: &Taxonomy) -> Vec<Candidate> {
        if g.is_video() != self.kind.is_video() {
            return Vec::new();
        }
        let raw = match self.kind {
            SgKind::ImageObject => image_object(corpus, g),
            SgKind::ImageAttribute => image_attribute(corpus, g),
            SgKind::ImageRelation => image_relation(corpus, g),
            SgKind::VideoObject => video_fact(corpus, g, false),
            SgKind::VideoRelation => video_fact(corpus, g, true),
            SgKind::VideoAction => video_action(corpus, g),
        };
        raw.into_iter()
            .filter(|c| tax.isolated_candidates(&c.pool, &c.truth, &c.also_valid) >= DISTRACTORS)
            .collect()
    }

    fn plan_of(&self, c: &Candidate) -> Result<TaskPlan, GenerationError> {
        TaskPlan::new(&self.schema, c.values.iter().cloned()).map_err(|e| GenerationError::InvalidPlan(e.to_string()))
    }

    /// Question, options and answer of `plan` for `seed`, without the asset.
    pub fn realize(&self, plan: &TaskPlan, source: &SourceData, seed: u64) -> Result<QuestionSpec, GenerationError> {
        Ok(self.realize_with_graph(plan, source, seed)?.0)
    }

    fn realize_with_graph<'a>(
        &self,
        plan: &TaskPlan,
        source: &'a SourceData,
        seed: u64,
    ) -> Result<(QuestionSpec, &'a SceneGraph), GenerationError> {
        if plan.generator != self.kind.id() {
            return Err(GenerationError::InvalidPlan(format!("plan belongs to `{}`", plan.generator)));
        }
        let corpus = source.corpus()?;
        let gid = plan
            .text("graph_id")
            .ok_or_else(|| GenerationError::InvalidPlan("missing graph_id".into()))?;
        let g = corpus
            .get(gid)
            .ok_or_else(|| GenerationError::StaleGraph(format!("graph `{gid}` not in corpus")))?;
        let cand = self
            .candidates(corpus, g, &source.taxonomy)
            .into_iter()
            .find(|c| self.plan_of(c).is_ok_and(|p| p.id == plan.id))
            .ok_or_else(|| GenerationError::StaleGraph(format!("graph `{gid}` no longer yields plan {}", plan.id)))?;
        let mut rng = rng_from(&[plan.id.0, seed]);
        let distractors =
            source
                .taxonomy
                .sample_distractors_excluding(&cand.pool, &cand.truth, &cand.also_valid, DISTRACTORS, &mut rng)?;
        Ok((QuestionSpec::shuffled(cand.question, cand.truth, distractors, &mut rng), g))
    }
}

impl TaskGenerator for SgGenerator {
    fn schema(&self) -> &PlanSchema {
        &self.schema
    }

    fn enumerate(&self, source: &SourceData) -> Result<Vec<TaskPlan>, GenerationError> {
        let corpus = source.corpus()?;
        let mut out: BTreeMap<PlanId, TaskPlan> = BTreeMap::new();
        for g in corpus.graphs() {
            for c in self.candidates(corpus, g, &source.taxonomy) {
                let p = self.plan_of(&c)?;
                out.insert(p.id, p);
            }
        }
        Ok(out.into_values().collect())
    }

    fn generate(&self, plan: &TaskPlan, source: &SourceData, seed: u64) -> Result<TaskInstance, GenerationError> {
        let (q, g) = self.realize_with_graph(plan, source, seed)?;
        let visual = if g.is_video() {
            Visual::Video(g.asset.clone())
        } else {
            Visual::Image(g.asset.clone())
        };
        Ok(TaskInstance {
            instance_id: TaskInstance::instance_id_for(plan.id, seed),
            plan_id: plan.id,
            generator: plan.generator.clone(),
            seed,
            visual,
            question: q.question,
            options: q.options,
            answer_index: q.answer_index,
        })
    }
}

pub fn builtin_generators() -> Vec<Arc<dyn TaskGenerator>> {
    SgKind::ALL
        .into_iter()
        .map(|k| Arc::new(SgGenerator::new(k)) as Arc<dyn TaskGenerator>)
        .collect()
}

fn pattern_rng(tag: &str, graph: &str, node: &str) -> crate::util::Rng {
    let key = format!("{tag}\u{0}{graph}\u{0}{node}");
    rng_from(&[stable_hash64(key.as_bytes())])
}

fn list(items: BTreeSet<String>) -> FieldValue {
    FieldValue::List(items.into_iter().collect())
}

fn image_object(corpus: &SceneGraphCorpus, g: &SceneGraph) -> Vec<Candidate> {
    let opts = PatternOptions {
        omit_category: true,
        ..Default::default()
    };
    let mut out = Vec::new();
    for o in &g.objects {
        let mut rng = pattern_rng("object", &g.graph_id, &o.id);
        let Some(p) = distinguishing_pattern_with(g, &o.id, &mut rng, &opts) else {
            continue;
        };
        out.push(Candidate {
            values: vec![
                ("graph_id", g.graph_id.as_str().into()),
                ("object", o.id.as_str().into()),
                ("subgraph", p.to_json().into()),
                ("answers", list(BTreeSet::new())),
            ],
            question: format!("What is {}?", noun_phrase(&p)),
            truth: o.category.clone(),
            also_valid: Vec::new(),
            pool: corpus.categories(),
        });
    }
    out
}

fn image_attribute(corpus: &SceneGraphCorpus, g: &SceneGraph) -> Vec<Candidate> {
    let mut out = Vec::new();
    for o in &g.objects {
        let pairs: BTreeSet<(&str, &str)> = o
            .attributes
            .iter()
            .map(|a| (a.kind.as_str(), a.value.as_str()))
            .collect();
        for (kind, value) in pairs {
            let opts = PatternOptions {
                omit_attribute_kind: Some(kind.to_string()),
                ..Default::default()
            };
            let mut rng = pattern_rng(&format!("attribute:{kind}"), &g.graph_id, &o.id);
            let Some(p) = distinguishing_pattern_with(g, &o.id, &mut rng, &opts) else {
                continue;
            };
            let others: BTreeSet<String> = o
                .values_of(kind)
                .filter(|v| *v != value)
                .map(str::to_string)
                .collect();
            out.push(Candidate {
                values: vec![
                    ("graph_id", g.graph_id.as_str().into()),
                    ("object", o.id.as_str().into()),
                    ("attribute_type", kind.into()),
                    ("attribute", value.into()),
                    ("subgraph", p.to_json().into()),
                    ("answers", list(others.clone())),
                ],
                question: format!("What is the {kind} of {}?", noun_phrase(&p)),
                truth: value.to_string(),
                also_valid: others.into_iter().collect(),
                pool: corpus.attribute_values(kind),
            });
        }
    }
    out
}

fn image_relation(corpus: &SceneGraphCorpus, g: &SceneGraph) -> Vec<Candidate> {
    let mut out = Vec::new();
    let edges: BTreeSet<(&str, &str, &str, &str)> = g
        .relations
        .iter()
        .filter(|e| e.source != e.target)
        .map(|e| (e.source.as_str(), e.target.as_str(), e.predicate.as_str(), e.family()))
        .collect();
    for &(s, t, pred, family) in &edges {
        let src_opts = PatternOptions {
            avoid_nodes: vec![t.to_string()],
            ..Default::default()
        };
        let dst_opts = PatternOptions {
            avoid_nodes: vec![s.to_string()],
            ..Default::default()
        };
        let ps = distinguishing_pattern_with(g, s, &mut pattern_rng(&format!("source:{t}"), &g.graph_id, s), &src_opts);
        let pt = distinguishing_pattern_with(g, t, &mut pattern_rng(&format!("target:{s}"), &g.graph_id, t), &dst_opts);
        let (Some(ps), Some(pt)) = (ps, pt) else {
            continue;
        };
        let others: BTreeSet<String> = edges
            .iter()
            .filter(|(s2, t2, p2, _)| *s2 == s && *t2 == t && *p2 != pred)
            .map(|(_, _, p2, _)| p2.to_string())
            .collect();
        let (sp, clause) = which_phrase(&ps);
        let (tp, _) = which_phrase(&pt);
        let comma = if clause { "," } else { "" };
        out.push(Candidate {
            values: vec![
                ("graph_id", g.graph_id.as_str().into()),
                ("source", s.into()),
                ("target", t.into()),
                ("relation", pred.into()),
                ("source_subgraph", ps.to_json().into()),
                ("target_subgraph", pt.to_json().into()),
                ("answers", list(others.clone())),
            ],
            question: format!("What is the relation from {sp}{comma} to {tp}?"),
            truth: pred.to_string(),
            also_valid: others.into_iter().collect(),
            pool: corpus.predicates(family),
        });
    }
    out
}

/// The single acting person of a video graph, if there is exactly one.
fn sole_person(g: &SceneGraph) -> Option<&str> {
    match g.person_ids().as_slice() {
        [one] => Some(one),
        _ => None,
    }
}

/// Action labels that occur exactly once and can anchor a temporal reference.
fn anchors(g: &SceneGraph) -> Vec<&str> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in &g.actions {
        *counts.entry(a.label.as_str()).or_default() += 1;
    }
    counts.into_iter().filter(|(_, c)| *c == 1).map(|(l, _)| l).collect()
}

fn windows(g: &SceneGraph) -> Vec<(&str, TemporalRelation, (u32, u32))> {
    let mut out = Vec::new();
    for anchor in anchors(g) {
        for rel in TemporalRelation::ALL {
            let r = TemporalReference {
                relation: rel,
                anchor: anchor.to_string(),
            };
            if let Ok(Some(w)) = temporal_window(g, &r) {
                out.push((anchor, rel, w));
            }
        }
    }
    out
}

/// Video what-object (`ask_relation = false`) and what-relation questions:
/// the person-object relation must hold on every frame of the window.
fn video_fact(corpus: &SceneGraphCorpus, g: &SceneGraph, ask_relation: bool) -> Vec<Candidate> {
    let Some(person) = sole_person(g) else {
        return Vec::new();
    };
    let person_edges: Vec<&SgRelation> = g
        .relations
        .iter()
        .filter(|e| e.source == person && e.target != person)
        .collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (anchor, rel, w) in windows(g) {
        for e in &person_edges {
            if !covers(g.relation_frames(e), w) {
                continue;
            }
            let obj = g.object(&e.target).expect("validated endpoint");
            if !seen.insert((anchor, rel, e.target.as_str(), e.predicate.as_str(), e.family())) {
                continue;
            }
            let during = |x: &SgRelation| overlap(g.relation_frames(x), w) > 0;
            let (question, truth, others, pool) = if ask_relation {
                if g.objects.iter().filter(|o| o.category == obj.category).count() != 1 {
                    continue;
                }
                let others: BTreeSet<String> = person_edges
                    .iter()
                    .filter(|x| x.target == e.target && x.family() == e.family() && x.predicate != e.predicate)
                    .filter(|x| during(x))
                    .map(|x| x.predicate.clone())
                    .collect();
                let q = if e.family() == "spatial" {
                    format!(
                        "What is the spatial relation of the person to the {} {} the person {anchor}?",
                        obj.category,
                        rel.name()
                    )
                } else {
                    format!(
                        "What is the person doing to the {} {} the person {anchor}?",
                        obj.category,
                        rel.name()
                    )
                };
                (q, e.predicate.clone(), others, corpus.predicates(e.family()))
            } else {
                let others: BTreeSet<String> = person_edges
                    .iter()
                    .filter(|x| x.target != e.target && x.predicate == e.predicate && during(x))
                    .map(|x| g.object(&x.target).expect("validated endpoint").category.clone())
                    .filter(|c| *c != obj.category)
                    .collect();
                let q = format!(
                    "What is the object that the person is {} {} the person {anchor}?",
                    e.predicate,
                    rel.name()
                );
                let pool = corpus.categories().into_iter().filter(|c| c != "person").collect();
                (q, obj.category.clone(), others, pool)
            };
            out.push(Candidate {
                values: vec![
                    ("graph_id", g.graph_id.as_str().into()),
                    ("object", e.target.as_str().into()),
                    ("relation", e.predicate.as_str().into()),
                    ("reference_type", e.family().into()),
                    ("reference_action", anchor.into()),
                    ("temporal", rel.name().into()),
                    ("answers", list(others.clone())),
                ],
                question,
                truth,
                also_valid: others.into_iter().collect(),
                pool,
            });
        }
    }
    out
}

/// Video what-action: exactly one other action label covers at least half
/// of the window; labels that merely overlap it are co-answers.
fn video_action(corpus: &SceneGraphCorpus, g: &SceneGraph) -> Vec<Candidate> {
    if sole_person(g).is_none() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (anchor, rel, w) in windows(g) {
        let len = w.1 - w.0 + 1;
        let mut strong = BTreeSet::new();
        let mut touching = BTreeSet::new();
        for a in g.actions.iter().filter(|a| a.label != anchor) {
            let ov = overlap((a.start, a.end), w);
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
        let truth = strong.pop_first().expect("one label");
        touching.remove(&truth);
        touching.insert(anchor.to_string());
        out.push(Candidate {
            values: vec![
                ("graph_id", g.graph_id.as_str().into()),
                ("action", truth.as_str().into()),
                ("reference_action", anchor.into()),
                ("temporal", rel.name().into()),
                ("answers", list(touching.clone())),
            ],
            question: format!("What action is the person doing {} {anchor}?", rel.name()),
            truth,
            also_valid: touching.into_iter().collect(),
            pool: corpus.action_labels(),
        });
    }
    out
}
