use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use taskgen_core::planspace::GeneratorRegistry;
use taskgen_core::taxonomy::Taxonomy;
use taskgen_core::testkit::MiniWorld;

use crate::common::{ensure, isolated, plans_of, Check, Closure};
use crate::enumeration::GENERATORS;

const OPTION_SETS: usize = 10_000;

/// Every pair in `options` is distinct and neither is an ancestor of the other.
fn clean(tax: &Closure, options: &[String]) -> Result<(), String> {
    for (i, a) in options.iter().enumerate() {
        for b in &options[i + 1..] {
            ensure(!tax.related(a, b), || format!("`{a}` and `{b}` conflict in {options:?}"))?;
        }
    }
    Ok(())
}

pub fn generated_options_clean() -> Check {
    let world = MiniWorld::new();
    let source = world.source();
    let registry = GeneratorRegistry::builtin();
    let tax = Closure::new(&source.taxonomy);
    let plans = plans_of(&registry, &source, &GENERATORS);
    let mut rng = StdRng::seed_from_u64(0x7a8);
    let mut near_misses = 0;
    for _ in 0..OPTION_SETS {
        let plan = &plans[rng.random_range(0..plans.len())];
        let seed: u64 = rng.random();
        let inst = registry
            .generate_unrendered(plan, &source, seed)
            .map_err(|e| format!("{}: {e}", plan.id))?;
        clean(&tax, &inst.options).map_err(|e| format!("{} seed {seed}: {e}", plan.generator))?;
        // count sets where a related concept was available but kept out
        let answer = &inst.options[inst.answer_index];
        if source.taxonomy.concepts().any(|c| c != answer && tax.related(c, answer)) {
            near_misses += 1;
        }
    }
    Ok(format!("{OPTION_SETS} option sets, {near_misses} with an answer that has taxonomy relatives"))
}

/// Random DAG over `size` concepts; parents always have a lower index.
fn random_taxonomy(rng: &mut StdRng, size: usize) -> Taxonomy {
    let concepts: Vec<String> = (0..size).map(|i| format!("c{i}")).collect();
    let mut edges = Vec::new();
    for child in 1..size {
        for parent in 0..child {
            if rng.random_bool(2.0 / size as f64) {
                edges.push((concepts[child].clone(), concepts[parent].clone()));
            }
        }
    }
    Taxonomy::new(concepts, edges).expect("edges point to lower indices")
}

pub fn sampler_clean() -> Check {
    let mut rng = StdRng::seed_from_u64(0xd157);
    let (mut draws, mut exhausted) = (0, 0);
    while draws < OPTION_SETS {
        let size = rng.random_range(8..40);
        let tax = random_taxonomy(&mut rng, size);
        let closure = Closure::new(&tax);
        let all: Vec<String> = tax.concepts().map(str::to_string).collect();
        for _ in 0..50 {
            let pool: Vec<String> = all.iter().filter(|_| rng.random_bool(0.7)).cloned().collect();
            let answer = all.choose(&mut rng).expect("non-empty").clone();
            let k = rng.random_range(1..=4);
            match tax.sample_distractors(&pool, &answer, k, &mut rng) {
                Ok(picked) => {
                    ensure(picked.len() == k, || format!("asked for {k}, got {picked:?}"))?;
                    ensure(picked.iter().all(|p| pool.contains(p)), || format!("{picked:?} not drawn from the pool"))?;
                    let mut options = picked;
                    options.push(answer);
                    clean(&closure, &options)?;
                    draws += 1;
                }
                Err(e) => {
                    let pool_set = pool.iter().cloned().collect();
                    let spare = isolated(&closure, &pool_set, &answer, &Default::default());
                    ensure(spare < k, || format!("refused ({e}) with {spare} isolated candidates for k={k}"))?;
                    exhausted += 1;
                }
            }
        }
    }
    Ok(format!("{draws} draws clean on random taxonomies, {exhausted} refused with fewer than k isolated candidates"))
}
