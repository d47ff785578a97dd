//! Sticker-grid generators: objects from the catalog are pasted into an
//! `n`x`n` grid and questioned about counts, identities, positions and
//! attributes.

mod layout;
mod render;

pub use layout::{
    absolute_position_name, position_names, relative_position, GridLayout, LayoutError, PlacedObject,
    RelativeDirection,
};
pub use render::{compose_image, compose_pixels, SpriteCache, BACKGROUNDS, DEFAULT_CELL_SIZE};

use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;

use crate::instance::{GenerationError, QuestionSpec, TaskInstance, Visual};
use crate::planspace::{FieldKind, FieldSpec, FieldValue, PlanSchema, SourceData, TaskGenerator, TaskPlan};
use crate::taxonomy::{AttributeType, ObjectCatalog, ObjectRecord, Taxonomy};
use crate::util::{rng_from, Rng};

pub const OPTION_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridKind {
    HowMany,
    What,
    Where,
    WhatAttribute,
    WhereAttribute,
}

impl GridKind {
    pub const ALL: [GridKind; 5] = [
        Self::HowMany,
        Self::What,
        Self::Where,
        Self::WhatAttribute,
        Self::WhereAttribute,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::HowMany => "2d-how-many",
            Self::What => "2d-what",
            Self::Where => "2d-where",
            Self::WhatAttribute => "2d-what-attribute",
            Self::WhereAttribute => "2d-where-attribute",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == id)
    }

    /// Partitions a plan of this kind may use.
    pub fn partitions(self) -> &'static [&'static str] {
        match self {
            Self::HowMany => &["category", "attribute", "category-attribute"],
            _ => &["absolute", "relative"],
        }
    }

    pub fn schema(self) -> PlanSchema {
        let partition = FieldSpec::new("partition", FieldKind::StringEnum, &self.partitions().join("|"));
        let grid = FieldSpec::new("grid_number", FieldKind::Integer, "{2,3}");
        let fields = match self {
            Self::HowMany => vec![
                partition,
                grid,
                FieldSpec::new("category", FieldKind::Concept, "catalog categories").optional(),
                FieldSpec::new("attribute_type", FieldKind::StringEnum, "color|material|shape").optional(),
                FieldSpec::new("attribute_value", FieldKind::AttributeValue, "catalog attribute values").optional(),
                FieldSpec::new("count", FieldKind::Integer, "1..n^2"),
            ],
            Self::What | Self::Where => vec![
                partition,
                grid,
                FieldSpec::new("category", FieldKind::Concept, "catalog categories"),
                FieldSpec::new("cell", FieldKind::Integer, "0..n^2").optional(),
                FieldSpec::new("reference_category", FieldKind::Concept, "catalog categories").optional(),
                FieldSpec::new("direction", FieldKind::StringEnum, "relative directions").optional(),
            ],
            Self::WhatAttribute | Self::WhereAttribute => vec![
                partition,
                grid,
                FieldSpec::new("attribute_type", FieldKind::StringEnum, "color|material|shape"),
                FieldSpec::new("attribute_value", FieldKind::AttributeValue, "catalog attribute values"),
                FieldSpec::new("cell", FieldKind::Integer, "0..n^2").optional(),
                FieldSpec::new("reference_category", FieldKind::Concept, "catalog categories").optional(),
                FieldSpec::new("direction", FieldKind::StringEnum, "relative directions").optional(),
            ],
        };
        PlanSchema::new(self.id(), fields).expect("static schema has unique fields")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridConfig {
    pub grid_numbers: Vec<usize>,
    pub cell_size: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            grid_numbers: vec![2, 3],
            cell_size: DEFAULT_CELL_SIZE,
        }
    }
}

/// Decoded plan fields, validated against the generator kind.
#[derive(Debug, Clone)]
pub struct GridParams {
    pub partition: String,
    pub n: usize,
    pub category: Option<String>,
    pub attribute: Option<(AttributeType, String)>,
    pub count: Option<usize>,
    pub cell: Option<usize>,
    pub reference: Option<String>,
    pub direction: Option<RelativeDirection>,
}

impl GridParams {
    pub fn from_plan(kind: GridKind, plan: &TaskPlan) -> Result<Self, GenerationError> {
        let bad = |m: String| GenerationError::InvalidPlan(m);
        if plan.generator != kind.id() {
            return Err(bad(format!("plan belongs to `{}`", plan.generator)));
        }
        let partition = plan
            .text("partition")
            .filter(|p| kind.partitions().contains(p))
            .ok_or_else(|| bad("missing or unknown partition".into()))?
            .to_string();
        let n = plan
            .int("grid_number")
            .filter(|n| *n == 2 || *n == 3)
            .ok_or_else(|| bad("grid_number must be 2 or 3".into()))? as usize;
        let attribute = match (plan.text("attribute_type"), plan.text("attribute_value")) {
            (Some(t), Some(v)) => Some((
                AttributeType::parse(t).ok_or_else(|| bad(format!("unknown attribute type `{t}`")))?,
                v.to_string(),
            )),
            (None, None) => None,
            _ => return Err(bad("attribute type and value must be given together".into())),
        };
        let cell = match plan.int("cell") {
            Some(c) if c >= 0 && (c as usize) < n * n => Some(c as usize),
            Some(c) => return Err(bad(format!("cell {c} outside a {n}x{n} grid"))),
            None => None,
        };
        let count = match plan.int("count") {
            Some(c) if c >= 1 && (c as usize) <= n * n => Some(c as usize),
            Some(c) => return Err(bad(format!("count {c} outside 1..={}", n * n))),
            None => None,
        };
        let direction = match plan.text("direction") {
            Some(d) => Some(RelativeDirection::parse(d).map_err(|e| bad(e.to_string()))?),
            None => None,
        };
        let p = Self {
            partition,
            n,
            category: plan.text("category").map(str::to_string),
            attribute,
            count,
            cell,
            reference: plan.text("reference_category").map(str::to_string),
            direction,
        };
        let ok = match (kind, p.partition.as_str()) {
            (GridKind::HowMany, "category") => p.category.is_some() && p.attribute.is_none() && p.count.is_some(),
            (GridKind::HowMany, "attribute") => p.category.is_none() && p.attribute.is_some() && p.count.is_some(),
            (GridKind::HowMany, _) => p.category.is_some() && p.attribute.is_some() && p.count.is_some(),
            (GridKind::What | GridKind::Where, "absolute") => {
                p.category.is_some() && p.cell.is_some() && p.reference.is_none() && p.direction.is_none()
            }
            (GridKind::What | GridKind::Where, _) => {
                p.category.is_some() && p.cell.is_none() && p.reference.is_some() && p.direction.is_some()
            }
            (_, "absolute") => {
                p.attribute.is_some() && p.cell.is_some() && p.reference.is_none() && p.direction.is_none()
            }
            _ => p.attribute.is_some() && p.cell.is_none() && p.reference.is_some() && p.direction.is_some(),
        };
        if !ok {
            return Err(bad(format!("fields do not fit the `{}` partition", p.partition)));
        }
        Ok(p)
    }
}

pub struct GridGenerator {
    kind: GridKind,
    config: GridConfig,
    schema: PlanSchema,
}

impl GridGenerator {
    pub fn new(kind: GridKind, config: GridConfig) -> Self {
        Self {
            kind,
            config,
            schema: kind.schema(),
        }
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    /// Lays out the grid and builds the question without rendering pixels.
    pub fn realize(
        &self,
        plan: &TaskPlan,
        source: &SourceData,
        seed: u64,
    ) -> Result<(GridLayout, QuestionSpec), GenerationError> {
        let params = GridParams::from_plan(self.kind, plan)?;
        let catalog = source.catalog()?;
        let mut rng = rng_from(&[plan.id.0, seed]);
        let ctx = Ctx {
            cell_size: self.config.cell_size,
            catalog,
            taxonomy: &source.taxonomy,
            p: &params,
        };
        match self.kind {
            GridKind::HowMany => ctx.how_many(&mut rng),
            GridKind::What => ctx.what(&mut rng),
            GridKind::Where => ctx.where_(&mut rng),
            GridKind::WhatAttribute => ctx.what_attribute(&mut rng),
            GridKind::WhereAttribute => ctx.where_attribute(&mut rng),
        }
    }
}

impl TaskGenerator for GridGenerator {
    fn schema(&self) -> &PlanSchema {
        &self.schema
    }

    fn enumerate(&self, source: &SourceData) -> Result<Vec<TaskPlan>, GenerationError> {
        let catalog = source.catalog()?;
        for &n in &self.config.grid_numbers {
            if n != 2 && n != 3 {
                return Err(GenerationError::SourceValidation(format!("grid number {n} is not 2 or 3")));
            }
        }
        let rows = enumerate_rows(self.kind, &self.config.grid_numbers, catalog, &source.taxonomy);
        rows.into_iter()
            .map(|vals| {
                TaskPlan::new(&self.schema, vals).map_err(|e| GenerationError::InvalidPlan(e.to_string()))
            })
            .collect()
    }

    fn generate(&self, plan: &TaskPlan, source: &SourceData, seed: u64) -> Result<TaskInstance, GenerationError> {
        let (layout, q) = self.realize(plan, source, seed)?;
        let png = compose_image(&layout, source.catalog()?, &source.sprites, self.config.cell_size)?;
        Ok(grid_instance(plan, seed, Visual::Png(png), q))
    }

    fn generate_unrendered(
        &self,
        plan: &TaskPlan,
        source: &SourceData,
        seed: u64,
    ) -> Result<TaskInstance, GenerationError> {
        let (_, q) = self.realize(plan, source, seed)?;
        Ok(grid_instance(plan, seed, Visual::Unrendered, q))
    }
}

fn grid_instance(plan: &TaskPlan, seed: u64, visual: Visual, q: QuestionSpec) -> TaskInstance {
    TaskInstance {
        instance_id: TaskInstance::instance_id_for(plan.id, seed),
        plan_id: plan.id,
        generator: plan.generator.clone(),
        seed,
        visual,
        question: q.question,
        options: q.options,
        answer_index: q.answer_index,
    }
}

pub fn builtin_generators() -> Vec<Arc<dyn TaskGenerator>> {
    GridKind::ALL
        .into_iter()
        .map(|k| Arc::new(GridGenerator::new(k, GridConfig::default())) as Arc<dyn TaskGenerator>)
        .collect()
}

type Row = Vec<(&'static str, FieldValue)>;

fn int(v: usize) -> FieldValue {
    FieldValue::Int(v as i64)
}

fn enumerate_rows(kind: GridKind, grids: &[usize], catalog: &ObjectCatalog, tax: &Taxonomy) -> Vec<Row> {
    let cats = catalog.categories();
    let avs = catalog.attribute_values();
    let objs = catalog.objects();
    let mut rows = Vec::new();
    match kind {
        GridKind::HowMany => {
            for &n in grids {
                let mut push = |part: &str, cat: Option<&str>, av: Option<&(AttributeType, String)>, avail: usize| {
                    for count in 1..=avail.min(n * n) {
                        rows.push(vec![
                            ("partition", part.into()),
                            ("grid_number", int(n)),
                            ("category", cat.map_or(FieldValue::Null, Into::into)),
                            ("attribute_type", av.map_or(FieldValue::Null, |(t, _)| t.as_str().into())),
                            ("attribute_value", av.map_or(FieldValue::Null, |(_, v)| v.as_str().into())),
                            ("count", int(count)),
                        ]);
                    }
                };
                for c in &cats {
                    let avail = objs.iter().filter(|o| &o.category == c).count();
                    push("category", Some(c), None, avail);
                }
                for av in &avs {
                    let avail = objs.iter().filter(|o| o.has_value(av.0, &av.1)).count();
                    push("attribute", None, Some(av), avail);
                }
                for c in &cats {
                    for av in &avs {
                        let avail = objs
                            .iter()
                            .filter(|o| &o.category == c && o.has_value(av.0, &av.1))
                            .count();
                        push("category-attribute", Some(c), Some(av), avail);
                    }
                }
            }
        }
        GridKind::What | GridKind::Where => {
            for &n in grids {
                for c in &cats {
                    for cell in 0..n * n {
                        rows.push(vec![
                            ("partition", "absolute".into()),
                            ("grid_number", int(n)),
                            ("category", c.as_str().into()),
                            ("cell", int(cell)),
                            ("reference_category", FieldValue::Null),
                            ("direction", FieldValue::Null),
                        ]);
                    }
                    for r in &cats {
                        if tax.conflicts(c, r) {
                            continue;
                        }
                        for d in RelativeDirection::ALL {
                            rows.push(vec![
                                ("partition", "relative".into()),
                                ("grid_number", int(n)),
                                ("category", c.as_str().into()),
                                ("cell", FieldValue::Null),
                                ("reference_category", r.as_str().into()),
                                ("direction", d.name().into()),
                            ]);
                        }
                    }
                }
            }
        }
        GridKind::WhatAttribute | GridKind::WhereAttribute => {
            let needs_clean_ref = kind == GridKind::WhereAttribute;
            for &n in grids {
                for (t, v) in &avs {
                    for cell in 0..n * n {
                        rows.push(vec![
                            ("partition", "absolute".into()),
                            ("grid_number", int(n)),
                            ("attribute_type", t.as_str().into()),
                            ("attribute_value", v.as_str().into()),
                            ("cell", int(cell)),
                            ("reference_category", FieldValue::Null),
                            ("direction", FieldValue::Null),
                        ]);
                    }
                    for r in &cats {
                        let target_ok = objs.iter().any(|o| o.has_value(*t, v) && !tax.conflicts(&o.category, r));
                        let ref_ok = objs
                            .iter()
                            .any(|o| &o.category == r && !(needs_clean_ref && o.has_value(*t, v)));
                        if !(target_ok && ref_ok) {
                            continue;
                        }
                        for d in RelativeDirection::ALL {
                            rows.push(vec![
                                ("partition", "relative".into()),
                                ("grid_number", int(n)),
                                ("attribute_type", t.as_str().into()),
                                ("attribute_value", v.as_str().into()),
                                ("cell", FieldValue::Null),
                                ("reference_category", r.as_str().into()),
                                ("direction", d.name().into()),
                            ]);
                        }
                    }
                }
            }
        }
    }
    rows
}

/// Naive English plural for category names in counting questions.
pub fn plural(noun: &str) -> String {
    let lower = noun.to_ascii_lowercase();
    if lower.ends_with('s')
        || lower.ends_with('x')
        || lower.ends_with('z')
        || lower.ends_with("ch")
        || lower.ends_with("sh")
    {
        format!("{noun}es")
    } else if lower.ends_with('y')
        && !matches!(lower.chars().rev().nth(1), Some('a' | 'e' | 'i' | 'o' | 'u'))
    {
        format!("{}ies", &noun[..noun.len() - 1])
    } else {
        format!("{noun}s")
    }
}

struct Ctx<'a> {
    cell_size: u32,
    catalog: &'a ObjectCatalog,
    taxonomy: &'a Taxonomy,
    p: &'a GridParams,
}

impl<'a> Ctx<'a> {
    fn objects(&self, keep: impl Fn(&ObjectRecord) -> bool) -> Vec<&'a ObjectRecord> {
        self.catalog.objects().iter().filter(|o| keep(o)).collect()
    }

    fn start(&self, rng: &mut Rng) -> GridLayout {
        GridLayout::empty(self.p.n, rng.random_range(0..BACKGROUNDS.len() as u8))
    }

    fn place(&self, layout: &mut GridLayout, cell: usize, obj: &ObjectRecord, rng: &mut Rng) {
        let max_off = (self.cell_size as f64 * 0.05) as i32;
        let scale = rng.random_range(0.8..=1.0);
        let offset = (rng.random_range(-max_off..=max_off), rng.random_range(-max_off..=max_off));
        layout.cells[cell] = Some(PlacedObject {
            object_id: obj.id.clone(),
            scale,
            offset,
        });
    }

    /// Puts a random number of fillers from `pool` into the `free` cells.
    fn fill(&self, layout: &mut GridLayout, free: &[usize], pool: &[&ObjectRecord], rng: &mut Rng) {
        if pool.is_empty() || free.is_empty() {
            return;
        }
        let m = rng.random_range(0..=free.len());
        let mut cells = free.to_vec();
        cells.shuffle(rng);
        for &cell in &cells[..m] {
            let obj = pool.choose(rng).expect("pool is non-empty");
            self.place(layout, cell, obj, rng);
        }
    }

    fn pick_one(&self, pool: &[&'a ObjectRecord], what: &str, rng: &mut Rng) -> Result<&'a ObjectRecord, GenerationError> {
        pool.choose(rng)
            .copied()
            .ok_or_else(|| GenerationError::InsufficientCatalog(format!("no object for {what}")))
    }

    fn free_cells(layout: &GridLayout) -> Vec<usize> {
        (0..layout.cells.len()).filter(|&i| layout.cells[i].is_none()).collect()
    }

    /// A (target, reference) cell pair in the plan's direction.
    fn relative_cells(&self, rng: &mut Rng) -> Result<(usize, usize), GenerationError> {
        let n = self.p.n;
        let d = self.p.direction.expect("relative plan has a direction");
        let mut pairs = Vec::new();
        for a in 0..n * n {
            for b in 0..n * n {
                if a != b && relative_position(a, b, n) == Ok(d) {
                    pairs.push((a, b));
                }
            }
        }
        pairs
            .choose(rng)
            .copied()
            .ok_or_else(|| GenerationError::InvalidPlan(format!("no cell pair lies {}", d.name())))
    }

    /// Cells other than `a` that lie in direction `d` from `b`; these stay empty
    /// so that "the object to the left of X" names one object.
    fn blocked(&self, a: usize, b: usize) -> Vec<usize> {
        let n = self.p.n;
        let d = self.p.direction.expect("relative plan has a direction");
        (0..n * n)
            .filter(|&x| x != a && x != b && relative_position(x, b, n) == Ok(d))
            .collect()
    }

    fn category_options(&self, truth: &str, rng: &mut Rng) -> Result<Vec<String>, GenerationError> {
        let pool = self.catalog.categories();
        Ok(self.taxonomy.sample_distractors(&pool, truth, OPTION_COUNT - 1, rng)?)
    }

    fn plain_options(pool: Vec<String>, exclude: &[&str], rng: &mut Rng, what: &str) -> Result<Vec<String>, GenerationError> {
        let mut cands: Vec<String> = pool.into_iter().filter(|c| !exclude.contains(&c.as_str())).collect();
        cands.sort();
        cands.dedup();
        if cands.len() < OPTION_COUNT - 1 {
            return Err(GenerationError::DistractorsExhausted(format!(
                "{what}: {} candidates, need {}",
                cands.len(),
                OPTION_COUNT - 1
            )));
        }
        cands.shuffle(rng);
        cands.truncate(OPTION_COUNT - 1);
        Ok(cands)
    }

    fn how_many(&self, rng: &mut Rng) -> Result<(GridLayout, QuestionSpec), GenerationError> {
        let p = self.p;
        let count = p.count.expect("validated");
        let cat = p.category.as_deref();
        let av = p.attribute.as_ref();
        let counted = |o: &ObjectRecord| {
            cat.is_none_or(|c| o.category == c) && av.is_none_or(|(t, v)| o.has_value(*t, v))
        };
        // a filler must not be countable under any reading of the question
        let filler_ok = |o: &ObjectRecord| match (cat, av) {
            (Some(c), None) => !self.taxonomy.conflicts(&o.category, c),
            (None, Some((t, v))) => !o.has_value(*t, v),
            (Some(c), Some((t, v))) => !(self.taxonomy.conflicts(&o.category, c) && o.has_value(*t, v)),
            (None, None) => true,
        };
        let mut layout = self.start(rng);
        let mut matching = self.objects(counted);
        if matching.len() < count {
            return Err(GenerationError::InsufficientCatalog(format!(
                "{} matching objects, plan counts {count}",
                matching.len()
            )));
        }
        matching.shuffle(rng);
        let mut cells: Vec<usize> = (0..p.n * p.n).collect();
        cells.shuffle(rng);
        for (obj, &cell) in matching.iter().take(count).zip(&cells) {
            self.place(&mut layout, cell, obj, rng);
        }
        let free = Self::free_cells(&layout);
        self.fill(&mut layout, &free, &self.objects(filler_ok), rng);

        let noun = match (cat, av) {
            (Some(c), None) => plural(c),
            (None, Some((_, v))) => format!("{v} objects"),
            (Some(c), Some((_, v))) => format!("{v} {}", plural(c)),
            (None, None) => "objects".into(),
        };
        let question = format!("How many {noun} are there in the image?");
        let truth = count.to_string();
        let pool = (1..=p.n * p.n).map(|i| i.to_string()).collect();
        let distractors = Self::plain_options(pool, &[&truth], rng, "counts")?;
        Ok((layout, QuestionSpec::shuffled(question, truth, distractors, rng)))
    }

    fn what(&self, rng: &mut Rng) -> Result<(GridLayout, QuestionSpec), GenerationError> {
        let p = self.p;
        let c = p.category.as_deref().expect("validated");
        let mut layout = self.start(rng);
        let targets = self.objects(|o| o.category == c);
        let target = self.pick_one(&targets, c, rng)?;
        let question = if p.partition == "absolute" {
            let cell = p.cell.expect("validated");
            self.place(&mut layout, cell, target, rng);
            let free = Self::free_cells(&layout);
            self.fill(&mut layout, &free, &self.objects(|_| true), rng);
            let pos = absolute_position_name(cell, p.n).expect("cell validated");
            format!("What is the object in the {pos} part of the image?")
        } else {
            let r = p.reference.as_deref().expect("validated");
            let d = p.direction.expect("validated");
            let refs = self.objects(|o| o.category == r);
            let reference = self.pick_one(&refs, r, rng)?;
            let (a, b) = self.relative_cells(rng)?;
            self.place(&mut layout, a, target, rng);
            self.place(&mut layout, b, reference, rng);
            let blocked = self.blocked(a, b);
            let free: Vec<usize> = Self::free_cells(&layout)
                .into_iter()
                .filter(|x| !blocked.contains(x))
                .collect();
            let pool = self.objects(|o| !self.taxonomy.conflicts(&o.category, r));
            self.fill(&mut layout, &free, &pool, rng);
            format!("What is the object {} the {r}?", d.phrase())
        };
        let distractors = self.category_options(c, rng)?;
        Ok((layout, QuestionSpec::shuffled(question, c.to_string(), distractors, rng)))
    }

    fn where_(&self, rng: &mut Rng) -> Result<(GridLayout, QuestionSpec), GenerationError> {
        let p = self.p;
        let c = p.category.as_deref().expect("validated");
        let mut layout = self.start(rng);
        let targets = self.objects(|o| o.category == c);
        let target = self.pick_one(&targets, c, rng)?;
        let (question, truth, pool) = if p.partition == "absolute" {
            let cell = p.cell.expect("validated");
            self.place(&mut layout, cell, target, rng);
            let free = Self::free_cells(&layout);
            let fillers = self.objects(|o| !self.taxonomy.conflicts(&o.category, c));
            self.fill(&mut layout, &free, &fillers, rng);
            let truth = absolute_position_name(cell, p.n).expect("cell validated").to_string();
            let pool = position_names(p.n).into_iter().map(str::to_string).collect::<Vec<_>>();
            (format!("Where is the {c} in the image?"), truth, pool)
        } else {
            let r = p.reference.as_deref().expect("validated");
            let d = p.direction.expect("validated");
            let refs = self.objects(|o| o.category == r);
            let reference = self.pick_one(&refs, r, rng)?;
            let (a, b) = self.relative_cells(rng)?;
            self.place(&mut layout, a, target, rng);
            self.place(&mut layout, b, reference, rng);
            let free = Self::free_cells(&layout);
            let fillers = self.objects(|o| {
                !self.taxonomy.conflicts(&o.category, c) && !self.taxonomy.conflicts(&o.category, r)
            });
            self.fill(&mut layout, &free, &fillers, rng);
            let pool = RelativeDirection::ALL.iter().map(|d| d.name().to_string()).collect();
            (format!("Where is the {c} with respect to the {r}?"), d.name().to_string(), pool)
        };
        let distractors = Self::plain_options(pool, &[&truth], rng, "positions")?;
        Ok((layout, QuestionSpec::shuffled(question, truth, distractors, rng)))
    }

    fn what_attribute(&self, rng: &mut Rng) -> Result<(GridLayout, QuestionSpec), GenerationError> {
        let p = self.p;
        let (t, v) = p.attribute.clone().expect("validated");
        let mut layout = self.start(rng);
        let (question, target) = if p.partition == "absolute" {
            let cell = p.cell.expect("validated");
            let targets = self.objects(|o| o.has_value(t, &v));
            let target = self.pick_one(&targets, &v, rng)?;
            self.place(&mut layout, cell, target, rng);
            let free = Self::free_cells(&layout);
            self.fill(&mut layout, &free, &self.objects(|_| true), rng);
            let pos = absolute_position_name(cell, p.n).expect("cell validated");
            (format!("What is the {} of the object in the {pos} part of the image?", t.as_str()), target)
        } else {
            let r = p.reference.as_deref().expect("validated");
            let d = p.direction.expect("validated");
            let targets = self.objects(|o| o.has_value(t, &v) && !self.taxonomy.conflicts(&o.category, r));
            let target = self.pick_one(&targets, &v, rng)?;
            let refs = self.objects(|o| o.category == r);
            let reference = self.pick_one(&refs, r, rng)?;
            let (a, b) = self.relative_cells(rng)?;
            self.place(&mut layout, a, target, rng);
            self.place(&mut layout, b, reference, rng);
            let blocked = self.blocked(a, b);
            let free: Vec<usize> = Self::free_cells(&layout)
                .into_iter()
                .filter(|x| !blocked.contains(x))
                .collect();
            let pool = self.objects(|o| !self.taxonomy.conflicts(&o.category, r));
            self.fill(&mut layout, &free, &pool, rng);
            (format!("What is the {} of the object {} the {r}?", t.as_str(), d.phrase()), target)
        };
        // every value the target carries is a correct answer, so none may be a distractor
        let own: Vec<&str> = target.values(t).iter().map(String::as_str).collect();
        let distractors = Self::plain_options(self.catalog.values_of(t), &own, rng, t.as_str())?;
        Ok((layout, QuestionSpec::shuffled(question, v, distractors, rng)))
    }

    fn where_attribute(&self, rng: &mut Rng) -> Result<(GridLayout, QuestionSpec), GenerationError> {
        let p = self.p;
        let (t, v) = p.attribute.clone().expect("validated");
        let mut layout = self.start(rng);
        let (question, truth, pool) = if p.partition == "absolute" {
            let cell = p.cell.expect("validated");
            let targets = self.objects(|o| o.has_value(t, &v));
            let target = self.pick_one(&targets, &v, rng)?;
            self.place(&mut layout, cell, target, rng);
            let free = Self::free_cells(&layout);
            let fillers = self.objects(|o| !o.has_value(t, &v));
            self.fill(&mut layout, &free, &fillers, rng);
            let truth = absolute_position_name(cell, p.n).expect("cell validated").to_string();
            let pool = position_names(p.n).into_iter().map(str::to_string).collect::<Vec<_>>();
            (format!("Where is the {v} object in the image?"), truth, pool)
        } else {
            let r = p.reference.as_deref().expect("validated");
            let d = p.direction.expect("validated");
            let targets = self.objects(|o| o.has_value(t, &v) && !self.taxonomy.conflicts(&o.category, r));
            let target = self.pick_one(&targets, &v, rng)?;
            let refs = self.objects(|o| o.category == r && !o.has_value(t, &v));
            let reference = self.pick_one(&refs, r, rng)?;
            let (a, b) = self.relative_cells(rng)?;
            self.place(&mut layout, a, target, rng);
            self.place(&mut layout, b, reference, rng);
            let free = Self::free_cells(&layout);
            let fillers = self.objects(|o| !o.has_value(t, &v) && !self.taxonomy.conflicts(&o.category, r));
            self.fill(&mut layout, &free, &fillers, rng);
            let pool = RelativeDirection::ALL.iter().map(|d| d.name().to_string()).collect();
            (format!("Where is the {v} object with respect to the {r}?"), d.name().to_string(), pool)
        };
        let distractors = Self::plain_options(pool, &[&truth], rng, "positions")?;
        Ok((layout, QuestionSpec::shuffled(question, truth, distractors, rng)))
    }
}
