//! Word Usage Graphs: building, clustering, sampling and analysing graphs of
//! human relatedness judgments between word usages.

pub mod clustering;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod sampling;
pub mod seed;
pub mod simulation;
pub mod store;

pub use clustering::{
    cluster, cluster_accuracy, conflicts, loss, normalized_loss, AnnealConfig, Clustering, ConflictSet,
};
pub use error::{Error, Result};
pub use graph::{
    build_usg, build_usg_pairs, build_wug, shift, Judgment, Node, Pair, Period, SenseDescription,
    ShiftedWeight, Usage, Wug,
};
pub use metrics::{agreement_report, change_scores, AgreementReport, ChangeScores};
pub use sampling::{next_round, round1_sample, AnnotationBatch, Provenance, RoundState, SamplingConfig};
pub use simulation::{
    robustness_experiment, run_pipeline_sim, NoiseModel, PipelineConfig, PlantedGraph, RobustnessCurve,
    SimReport,
};
pub use store::{ingest, IngestOptions, NewJudgment, Project, ProjectConfig, ProjectDir, RoundReport};
