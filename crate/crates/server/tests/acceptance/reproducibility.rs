use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use taskgen_core::instance::Visual;
use taskgen_core::planspace::GeneratorRegistry;
use taskgen_core::testkit::MiniWorld;

use crate::common::{ensure, plans_of, Check};
use crate::enumeration::GENERATORS;

const PAIRS: usize = 1000;

/// Regenerates random (plan, seed) pairs from a fresh registry and freshly
/// loaded source data and compares every byte.
pub fn regenerate_identical() -> Check {
    let first = MiniWorld::new();
    let (src_a, reg_a) = (first.source(), GeneratorRegistry::builtin());
    let second = MiniWorld::new();
    let (src_b, reg_b) = (second.source(), GeneratorRegistry::builtin());
    let plans = plans_of(&reg_a, &src_a, &GENERATORS);
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut pngs = 0;
    for _ in 0..PAIRS {
        let plan = &plans[rng.random_range(0..plans.len())];
        let seed: u64 = rng.random();
        let a = reg_a.generate(plan, &src_a, seed).map_err(|e| format!("{}: {e}", plan.id))?;
        let b = reg_b.generate(plan, &src_b, seed).map_err(|e| format!("{}: {e}", plan.id))?;
        ensure(a == b, || format!("plan {} seed {seed} differs between runs", plan.id))?;
        if matches!(a.visual, Visual::Png(_)) {
            pngs += 1;
        }
    }
    ensure(pngs > PAIRS / 4, || format!("only {pngs} rendered images in the sample"))?;
    Ok(format!("{PAIRS} pairs identical, {pngs} with PNG bytes"))
}
