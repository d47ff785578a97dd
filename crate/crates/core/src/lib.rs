//! Core library for building multiple-choice visual question answering
//! benchmarks from task plans: taxonomy-aware generators, instance
//! rendering, model evaluation, exact queries over results, and budgeted
//! query approximation with a Gaussian-process surrogate.

pub mod approx;
pub mod evalrun;
pub mod gridgen;
pub mod instance;
pub mod modelsim;
pub mod planspace;
pub mod queryeng;
pub mod sggen;
pub mod taxonomy;
pub mod testkit;
pub mod util;
