//! Dataset files, cross-validation, and experiment reporting.

mod config;
mod dataset;
mod experiment;
mod folds;

pub use config::{Augmentation, ClusterCount, FoldScheme, RunConfig};
pub use dataset::{
    format_dataset, load_dataset, parse_dataset, save_dataset, synthetic_linear_task, DatasetHeader, SyntheticTask,
    DATASET_MAGIC,
};
pub use experiment::{
    evaluate_model, load_external_scores, make_folds, parse_external_scores, run_experiment, run_on_dataset, train_on_dataset, write_report,
    ExperimentReport, FoldResult, ModelScores, TrainedArtifact, MODEL_ENN, MODEL_ENN_3EXT, MODEL_ENN_EXT, REPORT_FORMAT,
};
pub use folds::{explicit_split, holdout_split, kfold_split, load_indices, Fold};
