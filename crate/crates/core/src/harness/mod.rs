//! The operational surface: dataset generators, k-NN classification, file
//! formats, run configuration and the `rml` command line.

pub mod cli;
mod config;
mod data;
pub mod io;
mod knn;

pub use config::{
    run, Family, FamilyConfig, GeneratorConfig, GeneratorKind, ObjectiveConfig, ObjectiveKind, QueryConfig, RunConfig,
    Task, OUT_ENV,
};
pub use data::{
    gen_aniso_grid, gen_spiral, gen_trajectories, AnisoGridParams, LabeledDataset, SpiralParams, TrajectoryParams,
    SPIRAL_START_ANGLE,
};
pub use knn::{accuracy, knn_classify, knn_leave_one_out, loo_accuracy, EvalReport};
