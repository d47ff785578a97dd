use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::graph::{SceneGraph, SgAttribute, SgObject, SgRelation};
use crate::util::Rng;

pub const MAX_DEPTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeDirection {
    /// The constrained node is the relation's source.
    Out,
    /// The constrained node is the relation's target.
    In,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationConstraint {
    pub predicate: String,
    pub direction: EdgeDirection,
    pub node: SubgraphPattern,
}

/// Tree-shaped reference to a node: optional category, required attributes
/// and relation constraints to neighbouring sub-patterns.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubgraphPattern {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attributes: Vec<SgAttribute>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<RelationConstraint>,
}

impl SubgraphPattern {
    /// Category plus every attribute of `obj`, no relations.
    pub fn of_node(obj: &SgObject) -> Self {
        let mut p = Self {
            category: Some(obj.category.clone()),
            attributes: obj.attributes.clone(),
            relations: Vec::new(),
        };
        p.normalize();
        p
    }

    pub fn depth(&self) -> usize {
        self.relations
            .iter()
            .map(|r| 1 + r.node.depth())
            .max()
            .unwrap_or(0)
    }

    /// Sorts and dedupes attributes and relations so equal patterns
    /// serialize identically.
    pub fn normalize(&mut self) {
        self.attributes.sort();
        self.attributes.dedup();
        for r in &mut self.relations {
            r.node.normalize();
        }
        self.relations.sort();
        self.relations.dedup();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pattern serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    fn matches(&self, sg: &SceneGraph, obj: &SgObject) -> bool {
        if self.category.as_ref().is_some_and(|c| *c != obj.category) {
            return false;
        }
        if !self.attributes.iter().all(|a| obj.has(&a.kind, &a.value)) {
            return false;
        }
        self.relations.iter().all(|rc| {
            sg.relations.iter().any(|e| {
                if e.predicate != rc.predicate {
                    return false;
                }
                let other = match rc.direction {
                    EdgeDirection::Out if e.source == obj.id => &e.target,
                    EdgeDirection::In if e.target == obj.id => &e.source,
                    _ => return false,
                };
                sg.object(other).is_some_and(|o| rc.node.matches(sg, o))
            })
        })
    }
}

/// Ids of every node that can bind the pattern's root, in graph order.
pub fn match_subgraph<'a>(sg: &'a SceneGraph, p: &SubgraphPattern) -> Vec<&'a str> {
    sg.objects
        .iter()
        .filter(|o| p.matches(sg, o))
        .map(|o| o.id.as_str())
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct PatternOptions {
    /// Leave the category out of the root (when it is the answer).
    pub omit_category: bool,
    /// Leave attributes of this type out of the root (when it is asked about).
    pub omit_attribute_kind: Option<String>,
    /// Never route a relation hop through these nodes.
    pub avoid_nodes: Vec<String>,
}

/// Seeded greedy search for a pattern whose only match is `target`:
/// attributes first, then one relation hop, then a second hop.
pub fn distinguishing_pattern(sg: &SceneGraph, target: &str, rng: &mut Rng) -> Option<SubgraphPattern> {
    distinguishing_pattern_with(sg, target, rng, &PatternOptions::default())
}

pub fn distinguishing_pattern_with(
    sg: &SceneGraph,
    target: &str,
    rng: &mut Rng,
    opts: &PatternOptions,
) -> Option<SubgraphPattern> {
    let obj = sg.object(target)?;
    let mut p = SubgraphPattern::default();
    let mut count = match_subgraph(sg, &p).len();

    let try_add = |p: &mut SubgraphPattern, count: &mut usize, q: SubgraphPattern| {
        let c = match_subgraph(sg, &q).len();
        if c < *count {
            *p = q;
            *count = c;
        }
    };

    let mut attrs: Vec<SgAttribute> = obj
        .attributes
        .iter()
        .filter(|a| opts.omit_attribute_kind.as_deref() != Some(a.kind.as_str()))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    attrs.shuffle(rng);
    for a in attrs {
        if count == 1 {
            break;
        }
        let mut q = p.clone();
        q.attributes.push(a);
        try_add(&mut p, &mut count, q);
    }
    if count > 1 && !opts.omit_category {
        let mut q = p.clone();
        q.category = Some(obj.category.clone());
        try_add(&mut p, &mut count, q);
    }

    let avoid = |id: &str| id == target || opts.avoid_nodes.iter().any(|a| a == id);
    let hops = |node: &str| -> Vec<(&SgRelation, EdgeDirection, String)> {
        sg.relations
            .iter()
            .filter_map(|e| {
                if e.source == node && e.target != node {
                    Some((e, EdgeDirection::Out, e.target.clone()))
                } else if e.target == node && e.source != node {
                    Some((e, EdgeDirection::In, e.source.clone()))
                } else {
                    None
                }
            })
            .collect()
    };

    if count > 1 {
        let mut first = hops(target);
        first.retain(|(_, _, other)| !avoid(other));
        first.shuffle(rng);
        for (e, dir, other) in &first {
            if count == 1 {
                break;
            }
            let sub = SubgraphPattern::of_node(sg.object(other).expect("validated endpoint"));
            let mut q = p.clone();
            q.relations.push(RelationConstraint {
                predicate: e.predicate.clone(),
                direction: *dir,
                node: sub,
            });
            q.normalize();
            try_add(&mut p, &mut count, q);
        }
        if count > 1 {
            for (e, dir, mid) in &first {
                if count == 1 {
                    break;
                }
                let mut second = hops(mid);
                second.retain(|(e2, _, far)| !avoid(far) && !std::ptr::eq(*e2, *e));
                second.shuffle(rng);
                for (e2, dir2, far) in second {
                    if count == 1 {
                        break;
                    }
                    let mut sub = SubgraphPattern::of_node(sg.object(mid).expect("validated endpoint"));
                    sub.relations.push(RelationConstraint {
                        predicate: e2.predicate.clone(),
                        direction: dir2,
                        node: SubgraphPattern::of_node(sg.object(&far).expect("validated endpoint")),
                    });
                    let mut q = p.clone();
                    q.relations.push(RelationConstraint {
                        predicate: e.predicate.clone(),
                        direction: *dir,
                        node: sub,
                    });
                    q.normalize();
                    try_add(&mut p, &mut count, q);
                }
            }
        }
    }
    p.normalize();
    (count == 1 && p.depth() <= MAX_DEPTH).then_some(p)
}

fn head(p: &SubgraphPattern) -> String {
    let noun = p.category.as_deref().unwrap_or("object");
    if p.attributes.is_empty() {
        format!("the {noun}")
    } else {
        let adj: Vec<&str> = p.attributes.iter().map(|a| a.value.as_str()).collect();
        format!("the {} {noun}", adj.join(" and "))
    }
}

fn that_clause(rc: &RelationConstraint) -> String {
    match rc.direction {
        EdgeDirection::Out => format!("that is {} {}", rc.predicate, noun_phrase(&rc.node)),
        EdgeDirection::In => format!("that {} is {}", noun_phrase(&rc.node), rc.predicate),
    }
}

fn which_clause(rc: &RelationConstraint) -> String {
    match rc.direction {
        EdgeDirection::Out => format!("is {} {}", rc.predicate, noun_phrase(&rc.node)),
        EdgeDirection::In => format!("{} is {}", noun_phrase(&rc.node), rc.predicate),
    }
}

/// "the flat object that is on the brown and wood table".
pub fn noun_phrase(p: &SubgraphPattern) -> String {
    let mut out = head(p);
    let clauses: Vec<String> = p.relations.iter().map(that_clause).collect();
    if !clauses.is_empty() {
        out.push(' ');
        out.push_str(&clauses.join(" and "));
    }
    out
}

/// "the standing object, which the long snowboard is to the right of"; the
/// second value says whether a relative clause was emitted.
pub fn which_phrase(p: &SubgraphPattern) -> (String, bool) {
    let mut out = head(p);
    let clauses: Vec<String> = p.relations.iter().map(which_clause).collect();
    if clauses.is_empty() {
        return (out, false);
    }
    out.push_str(", which ");
    out.push_str(&clauses.join(" and "));
    (out, true)
}
