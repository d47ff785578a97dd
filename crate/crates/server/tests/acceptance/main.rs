//! Acceptance suite: one PASS/FAIL line per criterion. An optional first
//! argument keeps only criteria whose name contains it.

mod answerability;
mod cli;
mod common;
mod enumeration;
mod extraction;
mod query;
mod reproducibility;
mod taxonomy;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::Check;

const CRITERIA: &[(&str, fn() -> Check)] = &[
    ("enumeration_matches_oracle", enumeration::enumeration_oracle),
    ("generation_is_reproducible", reproducibility::regenerate_identical),
    ("grid_instances_are_answerable", answerability::grid_answerable),
    ("scene_graph_instances_are_answerable", answerability::scene_graph_answerable),
    ("options_are_taxonomy_clean", taxonomy::generated_options_clean),
    ("distractor_sampler_is_taxonomy_clean", taxonomy::sampler_clean),
    ("prompts_match_golden_files", extraction::prompts_golden),
    ("option_extraction_matches_fixtures", extraction::extraction_fixtures),
    ("queries_match_brute_force", query::queries_brute_force),
    ("pattern_mining_matches_brute_force", query::mining_brute_force),
    ("surprisingness_matches_brute_force", query::surprisingness_brute_force),
    ("gp_matches_dense_solve", numeric::gp_oracle),
    ("rank_metrics_match_fixtures", numeric::metric_fixtures),
    ("active_approximation_beats_baselines", numeric::approximation_direction),
    ("uniform_random_accuracy_is_chance", numeric::uniform_random_chance),
    ("cli_pipeline_end_to_end", cli::pipeline),
    ("killed_eval_resumes_identically", cli::kill_and_resume),
];

fn main() {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    // Keep panic output for the summary line only.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in CRITERIA {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
