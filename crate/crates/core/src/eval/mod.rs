//! Ensemble, metrics, the leave-one-dataset-out harness and synthetic
//! universes.

pub mod bench;
pub mod metrics;
pub mod pipeline;
pub mod synth;

pub use bench::{
    run_lodo_benchmark, BenchmarkReport, DatasetResult, MeanStd, MethodResult, MethodSummary, SeedMetrics,
};
pub use metrics::{borda_ensemble, kendall_tau_b, kendall_tau_top5, top5_recall, RankVector, TauTop5};
pub use pipeline::{TargetContext, TargetPrediction};
pub use synth::{generate_synthetic_universe, read_universe, write_universe, SynthConfig, SyntheticUniverse};
