//! Deterministic synthetic machine-sound benchmark: generation and loading.

mod dataset;
mod generate;
mod spec;
mod synth;

pub use dataset::{load, ClipMeta, Dataset, FeaturedClip, MachineData, Split, METADATA_FILE, SECTION_TASK};
pub use generate::{attribute_columns, clip_samples, generate, plan_clips, PlannedClip};
pub use spec::{
    AnomalyInjection, AnomalyKind, AttributeEffect, AttributeSpec, BenchmarkSpec, Counts, MachineSpec, SectionSpec,
    TargetShift,
};
pub use synth::{clip_rng, synthesize, ClipPlan};
