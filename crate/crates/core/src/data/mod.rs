//! Concept datasets, representation sets, and their synthetic generators.

mod dataset;
mod synth;

pub use dataset::{ConceptDataset, Provenance, RepresentationSet};
pub use synth::{
    gen_correlated_concepts, gen_impure_reps, gen_pure_reps, gen_spurious_tabular,
    gen_tabular_toy, impure_interval, tabular_features, SPURIOUS_SCALE,
};
